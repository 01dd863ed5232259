//! Semi-supervised label inference on multilayer hypergraphs.
//!
//! Scores `Z` (nodes × classes) minimize a fidelity term to the observed
//! labels plus, per layer, a p-Laplacian penalty on the clique expansion.
//! Gradient descent and cyclic, random and greedy (Gauss–Southwell)
//! coordinate descent are provided, all metered in flops so that their
//! traces are directly comparable.

pub mod bench;
pub mod cli;
pub mod error;
pub mod hypergraph;
pub mod io;
pub mod objective;
pub mod rng;
pub mod sbm;
pub mod solvers;

pub use error::{Error, Result};
pub use hypergraph::{clique_expand, CliqueLayer, Hyperedge, Layer, MultilayerHypergraph};
pub use objective::{build_label_matrix, LabelData, Problem};
pub use solvers::{solve, Checkpoint, Method, SolverOptions, SolverTrace};

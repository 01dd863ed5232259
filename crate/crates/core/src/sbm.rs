//! Planted-partition (stochastic block model) benchmark graphs and
//! per-class sampling of observed labels.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hypergraph::{Hyperedge, Layer, MultilayerHypergraph};
use crate::rng::seeded_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

impl SbmSpec {
    pub fn n(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return Err(Error::InvalidParameter("block sizes must be positive".into()));
        }
        Ok(())
    }

    /// Block id of every node, blocks laid out contiguously.
    pub fn membership(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
            .collect()
    }
}

/// Sample every unordered pair once; each edge becomes a weight-1 hyperedge
/// of size 2. Returns the single-layer hypergraph and block membership.
pub fn generate_sbm(spec: &SbmSpec) -> Result<(MultilayerHypergraph, Vec<usize>)> {
    spec.validate()?;
    let membership = spec.membership();
    let n = membership.len();
    let mut rng = seeded_rng(spec.seed);
    let mut hyperedges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let prob = if membership[u] == membership[v] {
                spec.p_in
            } else {
                spec.p_out
            };
            if rng.gen_bool(prob) {
                hyperedges.push(Hyperedge {
                    weight: 1.0,
                    nodes: vec![u, v],
                });
            }
        }
    }
    let graph = MultilayerHypergraph::new(n, vec![Layer { hyperedges }])?;
    Ok((graph, membership))
}

/// Observed nodes: `⌊perc/100 · |class|⌋` drawn uniformly without
/// replacement inside each class. `perc` is a percentage in `(0, 100]`.
pub fn sample_observed(ground_truth: &[usize], perc: f64, seed: u64) -> Result<Vec<usize>> {
    if !(perc > 0.0 && perc <= 100.0) {
        return Err(Error::InvalidParameter(format!(
            "perc must lie in (0, 100], got {perc}"
        )));
    }
    let m = ground_truth.iter().max().map_or(0, |&c| c + 1);
    let mut classes = vec![Vec::new(); m];
    for (u, &c) in ground_truth.iter().enumerate() {
        classes[c].push(u);
    }
    let mut rng = seeded_rng(seed);
    let mut observed = Vec::new();
    for (class, members) in classes.iter().enumerate() {
        let k = sample_count(members.len(), perc);
        if k == 0 {
            return Err(Error::EmptyClassSample {
                class,
                size: members.len(),
            });
        }
        observed.extend(
            index::sample(&mut rng, members.len(), k)
                .into_iter()
                .map(|i| members[i]),
        );
    }
    observed.sort_unstable();
    Ok(observed)
}

/// `⌊perc · size / 100⌋`, with a small tolerance against representation error.
pub fn sample_count(size: usize, perc: f64) -> usize {
    (perc * size as f64 / 100.0 + 1e-9).floor() as usize
}

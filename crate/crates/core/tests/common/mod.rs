#![allow(dead_code)]

use hypercd::hypergraph::{Hyperedge, Layer, MultilayerHypergraph};
use hypercd::objective::{build_label_matrix, Problem};
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub hypergraph: MultilayerHypergraph,
    pub truth: Vec<Option<usize>>,
    pub observed: Vec<usize>,
    pub m: usize,
    pub lambdas: Vec<f64>,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.hypergraph.n()
    }

    pub fn problem(&self, p: f64) -> Problem {
        let labels = build_label_matrix(&self.truth, &self.observed, self.m, self.n()).unwrap();
        Problem::new(&self.hypergraph, labels, p, &self.lambdas).unwrap()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_layer(rng: &mut impl Rng, n: usize, max_edges: usize) -> Layer {
    let count = rng.gen_range(1..=max_edges);
    let hyperedges = (0..count)
        .map(|_| {
            let size = rng.gen_range(2..=n.min(5));
            let mut nodes = index::sample(rng, n, size).into_vec();
            nodes.sort_unstable();
            Hyperedge {
                weight: rng.gen_range(0.1..3.0),
                nodes,
            }
        })
        .collect();
    Layer { hyperedges }
}

/// Random multilayer instance with `n` nodes, every node carrying a class.
pub fn random_instance(seed: u64, n: usize, layers: usize, m: usize) -> Instance {
    let mut rng = rng(seed);
    let layers: Vec<Layer> = (0..layers).map(|_| random_layer(&mut rng, n, 2 * n)).collect();
    let hypergraph = MultilayerHypergraph::new(n, layers).unwrap();
    let truth: Vec<Option<usize>> = (0..n).map(|_| Some(rng.gen_range(0..m))).collect();
    let k = rng.gen_range(1..=n.div_ceil(2));
    let mut observed = index::sample(&mut rng, n, k).into_vec();
    observed.sort_unstable();
    let lambdas = (0..hypergraph.num_layers()).map(|_| rng.gen_range(0.0..2.0)).collect();
    Instance {
        hypergraph,
        truth,
        observed,
        m,
        lambdas,
    }
}

/// Degrees straight from the hyperedge list: `Σ_{e∋u} w(e)(|e|−1)/|e|`.
pub fn oracle_degrees(layer: &Layer, n: usize) -> Vec<f64> {
    let mut d = vec![0.0; n];
    for e in &layer.hyperedges {
        let k = e.nodes.len() as f64;
        for &u in &e.nodes {
            d[u] += e.weight * (k - 1.0) / k;
        }
    }
    d
}

fn inv_sqrt(d: f64) -> f64 {
    if d > 0.0 {
        1.0 / d.sqrt()
    } else {
        0.0
    }
}

/// Label matrix from its definition.
pub fn oracle_labels(inst: &Instance) -> Array2<f64> {
    let mut counts = vec![0usize; inst.m];
    for &u in &inst.observed {
        counts[inst.truth[u].unwrap()] += 1;
    }
    let mut y = Array2::zeros((inst.n(), inst.m));
    for &u in &inst.observed {
        let c = inst.truth[u].unwrap();
        y[[u, c]] = 1.0 / counts[c] as f64;
    }
    y
}

/// `Σ_j θ_j(z^j)`, summing every node pair of every hyperedge separately.
pub fn oracle_objective(inst: &Instance, p: f64, z: &Array2<f64>) -> f64 {
    let y = oracle_labels(inst);
    let mut total = 0.0;
    for j in 0..inst.m {
        let mut theta = 0.0;
        for u in 0..inst.n() {
            theta += (z[[u, j]] - y[[u, j]]).powi(2);
        }
        for (layer, &lambda) in inst.hypergraph.layers().iter().zip(&inst.lambdas) {
            let deg = oracle_degrees(layer, inst.n());
            for e in &layer.hyperedges {
                let k = e.nodes.len() as f64;
                for (a, &u) in e.nodes.iter().enumerate() {
                    for &v in &e.nodes[a + 1..] {
                        let d = z[[u, j]] * inv_sqrt(deg[u]) - z[[v, j]] * inv_sqrt(deg[v]);
                        theta += lambda * e.weight / k * d.abs().powf(p);
                    }
                }
            }
        }
        total += theta;
    }
    total
}

/// `I + Σ_ℓ λ_ℓ L̄_ℓ` with `L̄ = I_{δ>0} − D^{-1/2} A D^{-1/2}`, assembled from hyperedges.
pub fn oracle_system(inst: &Instance) -> DMatrix<f64> {
    let n = inst.n();
    let mut a = DMatrix::<f64>::identity(n, n);
    for (layer, &lambda) in inst.hypergraph.layers().iter().zip(&inst.lambdas) {
        let deg = oracle_degrees(layer, n);
        for u in 0..n {
            if deg[u] > 0.0 {
                a[(u, u)] += lambda;
            }
        }
        for e in &layer.hyperedges {
            let k = e.nodes.len() as f64;
            for &u in &e.nodes {
                for &v in &e.nodes {
                    if u != v {
                        a[(u, v)] -= lambda * e.weight / k * inv_sqrt(deg[u]) * inv_sqrt(deg[v]);
                    }
                }
            }
        }
    }
    a
}

/// Dense solve of `(I + Σ λ L̄) z^j = y^j` for every class.
pub fn oracle_fixed_point(inst: &Instance) -> Array2<f64> {
    let a = oracle_system(inst);
    let lu = a.lu();
    let y = oracle_labels(inst);
    let mut z = Array2::zeros((inst.n(), inst.m));
    for j in 0..inst.m {
        let rhs = DVector::from_iterator(inst.n(), y.column(j).iter().copied());
        let sol = lu.solve(&rhs).expect("system is positive definite");
        for u in 0..inst.n() {
            z[[u, j]] = sol[u];
        }
    }
    z
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Random scores in `[-1, 2)`.
pub fn random_scores(rng: &mut impl Rng, n: usize, m: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, m), |_| rng.gen_range(-1.0..2.0))
}

/// Outcome of replaying a greedy run against brute-force selection.
#[derive(Debug, Default)]
pub struct GcdAudit {
    pub selections: usize,
    /// Selected entry is not within `1e-12` relative of the column maximum.
    pub mismatches: usize,
    /// Selected entry differs from the exact lowest-id argmax (numerical ties).
    pub near_ties: usize,
}

/// Replays the first `flops` iterations of greedy coordinate descent: the
/// run truncated at `k` flops is compared with the run truncated at `k − 1`,
/// and the entry that moved in each class must maximize the freshly
/// recomputed `|∇θ|` of that class.
pub fn audit_gcd(problem: &Problem, flops: u64) -> GcdAudit {
    use hypercd::objective::gradient;
    use hypercd::solvers::{run_gcd, SolverOptions};
    let run = |k: u64| {
        run_gcd(problem, &SolverOptions::with_budget(k).stride(1))
            .unwrap()
            .scores
    };
    let mut audit = GcdAudit::default();
    let mut prev = run(0);
    for k in 1..=flops {
        let next = run(k);
        let g = gradient(problem, &prev).unwrap();
        for j in 0..problem.m() {
            let col = g.column(j);
            let gmax = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let moved: Vec<usize> = (0..problem.n()).filter(|&i| next[[i, j]] != prev[[i, j]]).collect();
            audit.selections += 1;
            if gmax == 0.0 {
                if !moved.is_empty() {
                    audit.mismatches += 1;
                }
                continue;
            }
            let exact = (0..problem.n()).find(|&i| col[i].abs() == gmax).unwrap();
            match moved.as_slice() {
                [sel] if col[*sel].abs() >= gmax * (1.0 - 1e-12) => {
                    if *sel != exact {
                        audit.near_ties += 1;
                    }
                }
                _ => audit.mismatches += 1,
            }
        }
        prev = next;
    }
    audit
}

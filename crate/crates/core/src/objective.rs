//! The regularized least-squares objective
//!
//! ```text
//! θ(Z) = ‖Z − Y‖² + Σ_ℓ λ_ℓ Σ_{(u,v) ∈ G(H_ℓ)} w_uv Σ_j |Z_uj/√δ_u − Z_vj/√δ_v|^p
//! ```
//!
//! together with its gradient, per-coordinate quantities read from a
//! [`ScoreState`] cache, and the stepsize constants used by the solvers.
//!
//! Nodes with zero degree in a layer get `1/√δ := 0` there, so they only
//! feel the fidelity term of that layer.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hypergraph::{CliqueLayer, MultilayerHypergraph};
use crate::solvers::ScoreState;

/// Floor applied to the level-set bound inside `M^(p-2)` when `p < 2`.
pub const LEVEL_BOUND_FLOOR: f64 = 1e-3;

/// Observed labels and the derived label matrix `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelData {
    m: usize,
    ground_truth: Vec<Option<usize>>,
    observed: Vec<usize>,
    is_observed: Vec<bool>,
    y: Array2<f64>,
}

impl LabelData {
    pub fn num_classes(&self) -> usize {
        self.m
    }

    pub fn num_nodes(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn ground_truth(&self) -> &[Option<usize>] {
        &self.ground_truth
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn is_observed(&self, u: usize) -> bool {
        self.is_observed[u]
    }

    pub fn label_matrix(&self) -> &Array2<f64> {
        &self.y
    }
}

/// Build `Y` with `Y[u, j] = 1 / |C_j ∩ O|` for observed `u` of class `j`.
pub fn build_label_matrix(ground_truth: &[Option<usize>], observed: &[usize], m: usize, n: usize) -> Result<LabelData> {
    if ground_truth.len() != n {
        return Err(Error::DimensionError {
            expected: format!("{n} ground-truth entries"),
            found: ground_truth.len().to_string(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter("class count must be at least 1".into()));
    }
    if let Some(class) = ground_truth.iter().flatten().find(|&&c| c >= m) {
        return Err(Error::InvalidClass { class: *class, m });
    }
    if observed.is_empty() {
        return Err(Error::EmptyObservation);
    }
    let mut obs = observed.to_vec();
    obs.sort_unstable();
    obs.dedup();

    let mut is_observed = vec![false; n];
    let mut class_counts = vec![0usize; m];
    for &u in &obs {
        if u >= n {
            return Err(Error::InvalidNode { node: u as i64, n });
        }
        let class = ground_truth[u].ok_or(Error::MissingLabel(u))?;
        class_counts[class] += 1;
        is_observed[u] = true;
    }
    let mut y = Array2::zeros((n, m));
    for &u in &obs {
        let class = ground_truth[u].expect("checked above");
        y[[u, class]] = 1.0 / class_counts[class] as f64;
    }
    Ok(LabelData {
        m,
        ground_truth: ground_truth.to_vec(),
        observed: obs,
        is_observed,
        y,
    })
}

/// One clique-expanded layer with its regularization weight and `D^{-1/2}`.
#[derive(Debug, Clone)]
pub struct LayerTerm {
    pub clique: CliqueLayer,
    pub lambda: f64,
    /// `1/√δ_u`, or 0 for isolated nodes.
    pub inv_sqrt_degree: Vec<f64>,
}

impl LayerTerm {
    pub fn new(clique: CliqueLayer, lambda: f64) -> Self {
        let inv_sqrt_degree = clique
            .degrees
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        Self {
            clique,
            lambda,
            inv_sqrt_degree,
        }
    }

    /// Scaled difference `Z_sj/√δ_s − Z_tj/√δ_t` along oriented edge `e`.
    #[inline]
    pub fn scaled_difference(&self, z: &Array2<f64>, e: usize, j: usize) -> f64 {
        let (s, t) = self.clique.incidence[e];
        z[[s, j]] * self.inv_sqrt_degree[s] - z[[t, j]] * self.inv_sqrt_degree[t]
    }
}

/// A complete instance: layers, labels, exponent `p` and weights `λ_ℓ`.
#[derive(Debug, Clone)]
pub struct Problem {
    n: usize,
    p: f64,
    layers: Vec<LayerTerm>,
    labels: LabelData,
}

impl Problem {
    pub fn new(hypergraph: &MultilayerHypergraph, labels: LabelData, p: f64, lambdas: &[f64]) -> Result<Self> {
        Self::from_clique_layers(hypergraph.clique_layers(), labels, p, lambdas)
    }

    pub fn from_clique_layers(cliques: Vec<CliqueLayer>, labels: LabelData, p: f64, lambdas: &[f64]) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
        }
        if cliques.is_empty() {
            return Err(Error::InvalidParameter("at least one layer is required".into()));
        }
        if lambdas.len() != cliques.len() {
            return Err(Error::DimensionError {
                expected: format!("{} lambdas (one per layer)", cliques.len()),
                found: lambdas.len().to_string(),
            });
        }
        if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {l}")));
        }
        let n = labels.num_nodes();
        if let Some(c) = cliques.iter().find(|c| c.n() != n) {
            return Err(Error::DimensionError {
                expected: format!("{n} nodes"),
                found: c.n().to_string(),
            });
        }
        let layers = cliques
            .into_iter()
            .zip(lambdas)
            .map(|(c, &l)| LayerTerm::new(c, l))
            .collect();
        Ok(Self { n, p, layers, labels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.labels.num_classes()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn layers(&self) -> &[LayerTerm] {
        &self.layers
    }

    pub fn labels(&self) -> &LabelData {
        &self.labels
    }

    pub fn lambda_sum(&self) -> f64 {
        self.layers.iter().map(|l| l.lambda).sum()
    }

    pub(crate) fn check_shape(&self, z: &Array2<f64>) -> Result<()> {
        if z.dim() != (self.n, self.m()) {
            return Err(Error::DimensionError {
                expected: format!("{}x{}", self.n, self.m()),
                found: format!("{}x{}", z.nrows(), z.ncols()),
            });
        }
        Ok(())
    }

    pub(crate) fn check_index(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.m() {
            return Err(Error::IndexOutOfRange { node: i, class: j });
        }
        Ok(())
    }
}

/// `φ_p(y) = |y|^{p-1} sgn(y)`.
#[inline]
pub fn phi_p(y: f64, p: f64) -> f64 {
    if p == 2.0 {
        y
    } else if y == 0.0 {
        0.0
    } else {
        y.signum() * y.abs().powf(p - 1.0)
    }
}

#[inline]
pub(crate) fn abs_pow(y: f64, p: f64) -> f64 {
    if p == 2.0 {
        y * y
    } else {
        y.abs().powf(p)
    }
}

/// Value of `θ(Z)`.
pub fn evaluate(problem: &Problem, z: &Array2<f64>) -> Result<f64> {
    problem.check_shape(z)?;
    let y = problem.labels.label_matrix();
    let fidelity: f64 = z.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(fidelity + regularizer(problem, z))
}

/// Regularizer `r_p(Z)` alone; `z` must already have the right shape.
pub fn regularizer(problem: &Problem, z: &Array2<f64>) -> f64 {
    let p = problem.p;
    let m = problem.m();
    let mut total = 0.0;
    for layer in &problem.layers {
        if layer.lambda == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for (e, &w) in layer.clique.weights.iter().enumerate() {
            let mut edge = 0.0;
            for j in 0..m {
                edge += abs_pow(layer.scaled_difference(z, e, j), p);
            }
            acc += w * edge;
        }
        total += layer.lambda * acc;
    }
    total
}

/// Full gradient `2(Z − Y) + p Σ_ℓ λ_ℓ (B_ℓ D_ℓ^{-1/2})ᵀ W_ℓ φ_p(B_ℓ D_ℓ^{-1/2} Z)`.
pub fn gradient(problem: &Problem, z: &Array2<f64>) -> Result<Array2<f64>> {
    problem.check_shape(z)?;
    let mut g = (z - problem.labels.label_matrix()) * 2.0;
    add_regularizer_gradient(problem, z, &mut g);
    Ok(g)
}

pub(crate) fn add_regularizer_gradient(problem: &Problem, z: &Array2<f64>, g: &mut Array2<f64>) {
    let p = problem.p;
    let m = problem.m();
    for layer in &problem.layers {
        if layer.lambda == 0.0 {
            continue;
        }
        let scale = p * layer.lambda;
        for (e, &w) in layer.clique.weights.iter().enumerate() {
            let (s, t) = layer.clique.incidence[e];
            let (ds, dt) = (layer.inv_sqrt_degree[s], layer.inv_sqrt_degree[t]);
            for j in 0..m {
                let flux = scale * w * phi_p(layer.scaled_difference(z, e, j), p);
                g[[s, j]] += flux * ds;
                g[[t, j]] -= flux * dt;
            }
        }
    }
}

/// Entry `(i, j)` of the gradient, read from the cached scaled differences.
pub fn coordinate_gradient(problem: &Problem, state: &ScoreState, i: usize, j: usize) -> Result<f64> {
    problem.check_index(i, j)?;
    let z = state.scores();
    let y = problem.labels.label_matrix();
    let mut g = 2.0 * (z[[i, j]] - y[[i, j]]);
    for (l, layer) in problem.layers.iter().enumerate() {
        if layer.lambda == 0.0 {
            continue;
        }
        let u = state.scaled_differences(l);
        let mut acc = 0.0;
        for &e in &layer.clique.adjacency[i] {
            acc += layer.clique.weights[e] * layer.clique.orientation_sign(e, i) * phi_p(u[[e, j]], problem.p);
        }
        g += problem.p * layer.lambda * layer.inv_sqrt_degree[i] * acc;
    }
    Ok(g)
}

/// Diagonal Hessian entry `2 + 2 Σ_ℓ λ_ℓ [δ_ℓ(i) > 0]` (p = 2 only).
pub fn coordinate_lipschitz(problem: &Problem, i: usize) -> Result<f64> {
    if problem.p != 2.0 {
        return Err(Error::WrongMode(problem.p));
    }
    if i >= problem.n {
        return Err(Error::IndexOutOfRange { node: i, class: 0 });
    }
    let active: f64 = problem
        .layers
        .iter()
        .filter(|l| l.clique.degrees[i] > 0.0)
        .map(|l| l.lambda)
        .sum();
    Ok(2.0 + 2.0 * active)
}

/// Level-set magnitude bound `max(1, max_ℓ max |U_ℓ|)` of a state.
pub fn level_bound(state: &ScoreState) -> f64 {
    state.max_abs_difference().max(1.0)
}

/// Fixed stepsize shared by all methods, from a bound on the Lipschitz
/// constant of the gradient.
pub fn global_stepsize(problem: &Problem, state: &ScoreState) -> f64 {
    global_stepsize_with_bound(problem, level_bound(state))
}

/// [`global_stepsize`] with an explicit level-set bound `M`.
///
/// p = 2 uses `λ_max(L̄) <= 2`; otherwise
/// `L̂ = 2 + p|p-1| Σ_ℓ λ_ℓ ŵ_ℓ 2 d̂_ℓ M^(p-2)` with `M` floored at
/// [`LEVEL_BOUND_FLOOR`] when `p < 2`.
pub fn global_stepsize_with_bound(problem: &Problem, level_bound: f64) -> f64 {
    let p = problem.p;
    if p == 2.0 {
        return 1.0 / (2.0 + 4.0 * problem.lambda_sum());
    }
    let m_eff = if p < 2.0 {
        level_bound.max(LEVEL_BOUND_FLOOR)
    } else {
        level_bound
    };
    let level = m_eff.powf(p - 2.0);
    let coupling: f64 = problem
        .layers
        .iter()
        .map(|l| l.lambda * l.clique.max_weight() * 2.0 * l.clique.max_edge_degree() as f64)
        .sum();
    1.0 / (2.0 + p * (p - 1.0).abs() * coupling * level)
}

/// `θ(Z + s e_ij) − θ(Z)` from the fidelity term and the edges incident to `i`.
pub fn delta_objective(problem: &Problem, state: &ScoreState, i: usize, j: usize, s: f64) -> Result<f64> {
    problem.check_index(i, j)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    let r = state.scores()[[i, j]] - problem.labels.label_matrix()[[i, j]];
    // (r + s)^2 - r^2
    let mut delta = s * (2.0 * r + s);
    let p = problem.p;
    for (l, layer) in problem.layers.iter().enumerate() {
        let scale = layer.inv_sqrt_degree[i];
        if layer.lambda == 0.0 || scale == 0.0 {
            continue;
        }
        let u = state.scaled_differences(l);
        let mut acc = 0.0;
        for &e in &layer.clique.adjacency[i] {
            let old = u[[e, j]];
            let shift = layer.clique.orientation_sign(e, i) * scale * s;
            let change = if p == 2.0 {
                shift * (2.0 * old + shift)
            } else {
                abs_pow(old + shift, p) - abs_pow(old, p)
            };
            acc += layer.clique.weights[e] * change;
        }
        delta += layer.lambda * acc;
    }
    Ok(delta)
}

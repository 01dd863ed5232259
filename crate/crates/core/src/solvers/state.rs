use ndarray::Array2;

use super::assign_row;
use super::heap::IndexedMaxHeap;
use crate::error::Result;
use crate::objective::{self, phi_p, Problem};

/// Iterate `Z` plus everything a coordinate update needs to stay O(degree):
/// the scaled differences `U_ℓ = B_ℓ D_ℓ^{-1/2} Z`, the gradient, optional
/// per-class max-heaps over `|G|`, the objective value and the running
/// assignment/accuracy.
#[derive(Debug, Clone)]
pub struct ScoreState {
    z: Array2<f64>,
    diffs: Vec<Array2<f64>>,
    grad: Array2<f64>,
    heaps: Option<Vec<IndexedMaxHeap>>,
    objective: f64,
    assignment: Vec<usize>,
    correct: usize,
    evaluated: usize,
    flops: u64,
}

/// Build a consistent [`ScoreState`] at `z0` with a zero flop counter.
pub fn init_state(problem: &Problem, z0: Array2<f64>) -> Result<ScoreState> {
    problem.check_shape(&z0)?;
    let m = problem.m();
    let diffs = problem
        .layers()
        .iter()
        .map(|layer| {
            let mut u = Array2::zeros((layer.clique.num_edges(), m));
            for e in 0..layer.clique.num_edges() {
                for j in 0..m {
                    u[[e, j]] = layer.scaled_difference(&z0, e, j);
                }
            }
            u
        })
        .collect::<Vec<_>>();

    let mut grad = (&z0 - problem.labels().label_matrix()) * 2.0;
    let p = problem.p();
    for (layer, u) in problem.layers().iter().zip(&diffs) {
        if layer.lambda == 0.0 {
            continue;
        }
        let scale = p * layer.lambda;
        for (e, &w) in layer.clique.weights.iter().enumerate() {
            let (s, t) = layer.clique.incidence[e];
            for j in 0..m {
                let flux = scale * w * phi_p(u[[e, j]], p);
                grad[[s, j]] += flux * layer.inv_sqrt_degree[s];
                grad[[t, j]] -= flux * layer.inv_sqrt_degree[t];
            }
        }
    }

    let objective = objective::evaluate(problem, &z0)?;
    let assignment = super::assign_labels(&z0);
    let labels = problem.labels();
    let mut correct = 0;
    let mut evaluated = 0;
    for (u, truth) in labels.ground_truth().iter().enumerate() {
        if let (false, Some(c)) = (labels.is_observed(u), truth) {
            evaluated += 1;
            if assignment[u] == *c {
                correct += 1;
            }
        }
    }
    Ok(ScoreState {
        z: z0,
        diffs,
        grad,
        heaps: None,
        objective,
        assignment,
        correct,
        evaluated,
        flops: 0,
    })
}

impl ScoreState {
    pub fn scores(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn into_scores(self) -> Array2<f64> {
        self.z
    }

    /// Cached `U_ℓ` (edges × classes) of layer `l`.
    pub fn scaled_differences(&self, l: usize) -> &Array2<f64> {
        &self.diffs[l]
    }

    pub fn gradient(&self) -> &Array2<f64> {
        &self.grad
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Running accuracy on unlabeled nodes with known ground truth, NaN if none.
    pub fn accuracy(&self) -> f64 {
        if self.evaluated == 0 {
            f64::NAN
        } else {
            self.correct as f64 / self.evaluated as f64
        }
    }

    pub fn flops(&self) -> u64 {
        self.flops
    }

    pub fn add_flops(&mut self, k: u64) {
        self.flops += k;
    }

    pub fn grad_inf_norm(&self) -> f64 {
        self.grad.iter().fold(0.0, |acc, g| acc.max(g.abs()))
    }

    pub fn max_abs_difference(&self) -> f64 {
        self.diffs
            .iter()
            .flat_map(|u| u.iter())
            .fold(0.0, |acc, d| acc.max(d.abs()))
    }

    /// Build one max-heap per class keyed by `|G_·j|`.
    pub fn enable_heaps(&mut self) {
        let m = self.z.ncols();
        self.heaps = Some(
            (0..m)
                .map(|j| IndexedMaxHeap::from_keys(self.grad.column(j).iter().map(|g| g.abs()).collect()))
                .collect(),
        );
    }

    /// Lowest-id argmax of `|G_·j|` and its value, when heaps are enabled.
    pub fn heap_top(&self, j: usize) -> Option<(usize, f64)> {
        self.heaps.as_ref().and_then(|h| h[j].top())
    }

    /// Move `Z_ij` by `-alpha * G_ij`; returns the objective change.
    pub fn apply_coordinate_update(&mut self, problem: &Problem, i: usize, j: usize, alpha: f64) -> Result<f64> {
        problem.check_index(i, j)?;
        let step = -alpha * self.grad[[i, j]];
        self.apply_step(problem, i, j, step)
    }

    /// Move `Z_ij` by `step`; returns the objective change.
    pub fn apply_step(&mut self, problem: &Problem, i: usize, j: usize, step: f64) -> Result<f64> {
        let delta = objective::delta_objective(problem, self, i, j, step)?;
        self.apply_step_with_delta(problem, i, j, step, delta);
        Ok(delta)
    }

    /// Apply a step whose objective change was already computed.
    pub(crate) fn apply_step_with_delta(&mut self, problem: &Problem, i: usize, j: usize, step: f64, delta: f64) {
        if step == 0.0 {
            return;
        }
        debug_assert!(i < self.z.nrows() && j < self.z.ncols());
        let p = problem.p();
        self.z[[i, j]] += step;
        self.grad[[i, j]] += 2.0 * step;

        for (layer, u) in problem.layers().iter().zip(self.diffs.iter_mut()) {
            let si = layer.inv_sqrt_degree[i];
            if si == 0.0 {
                continue;
            }
            let clique = &layer.clique;
            let scale = p * layer.lambda;
            for &e in &clique.adjacency[i] {
                let sign = clique.orientation_sign(e, i);
                let old = u[[e, j]];
                let new = old + sign * si * step;
                u[[e, j]] = new;
                if scale == 0.0 {
                    continue;
                }
                let flux = if p == 2.0 {
                    scale * clique.weights[e] * (new - old)
                } else {
                    scale * clique.weights[e] * (phi_p(new, p) - phi_p(old, p))
                };
                let v = clique.neighbor(e, i);
                self.grad[[i, j]] += flux * sign * si;
                self.grad[[v, j]] -= flux * sign * layer.inv_sqrt_degree[v];
                if let Some(heaps) = self.heaps.as_mut() {
                    heaps[j].update(v, self.grad[[v, j]].abs());
                }
            }
        }
        if let Some(heaps) = self.heaps.as_mut() {
            heaps[j].update(i, self.grad[[i, j]].abs());
        }
        self.objective += delta;
        self.refresh_assignment(problem, i);
    }

    fn refresh_assignment(&mut self, problem: &Problem, i: usize) {
        let new = assign_row(self.z.row(i));
        let old = self.assignment[i];
        if new == old {
            return;
        }
        self.assignment[i] = new;
        let labels = problem.labels();
        if labels.is_observed(i) {
            return;
        }
        if let Some(truth) = labels.ground_truth()[i] {
            if old == truth {
                self.correct -= 1;
            }
            if new == truth {
                self.correct += 1;
            }
        }
    }
}

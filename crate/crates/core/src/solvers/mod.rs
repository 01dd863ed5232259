//! Gradient descent and the cyclic, random and greedy coordinate descent
//! methods, all measured in flops: one flop is one node index moved across
//! every class, so a full gradient step costs `n` flops and every coordinate
//! iteration costs one.

mod heap;
mod state;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use heap::IndexedMaxHeap;
pub use state::{init_state, ScoreState};

use crate::error::{Error, Result};
use crate::objective::{self, Problem};
use crate::rng::seeded_rng;

/// Maximum number of step halvings before a non-descending update is skipped.
pub const MAX_HALVINGS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Gd,
    Ccd,
    Rcd,
    Gcd,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Gd, Method::Ccd, Method::Rcd, Method::Gcd];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Ccd => "ccd",
            Method::Rcd => "rcd",
            Method::Gcd => "gcd",
        }
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, Method::Ccd | Method::Rcd)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gd" => Ok(Method::Gd),
            "ccd" => Ok(Method::Ccd),
            "rcd" => Ok(Method::Rcd),
            "gcd" => Ok(Method::Gcd),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

/// Default checkpoint spacing, `max(1, ⌈n/100⌉)` flops.
pub fn default_stride(n: usize) -> u64 {
    (n as u64).div_ceil(100).max(1)
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub budget_flops: u64,
    /// Checkpoint spacing in flops; `None` uses [`default_stride`].
    pub checkpoint_stride: Option<u64>,
    pub seed: u64,
    /// Overrides the default stepsize of every method.
    pub stepsize: Option<f64>,
    /// Stop early once `‖∇θ‖_∞` drops to this value.
    pub grad_tol: Option<f64>,
    /// Starting point; zero when absent.
    pub initial: Option<Array2<f64>>,
}

impl SolverOptions {
    pub fn with_budget(budget_flops: u64) -> Self {
        Self {
            budget_flops,
            checkpoint_stride: None,
            seed: 0,
            stepsize: None,
            grad_tol: None,
            initial: None,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn stride(mut self, stride: u64) -> Self {
        self.checkpoint_stride = Some(stride);
        self
    }

    pub fn grad_tol(mut self, tol: f64) -> Self {
        self.grad_tol = Some(tol);
        self
    }

    pub fn stepsize(mut self, alpha: f64) -> Self {
        self.stepsize = Some(alpha);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub flops: u64,
    pub normalized_flops: f64,
    pub objective: f64,
    pub accuracy: f64,
}

/// Flop-stamped record of one solver run.
#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub method: Method,
    pub p: f64,
    pub seed: u64,
    pub n: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub assignment: Vec<usize>,
    pub scores: Array2<f64>,
    pub grad_inf_norm: f64,
    /// Set when a requested gradient tolerance was not met or the objective
    /// stopped being finite.
    pub failed: bool,
}

impl SolverTrace {
    pub fn total_flops(&self) -> u64 {
        self.checkpoints.last().map_or(0, |c| c.flops)
    }

    pub fn final_objective(&self) -> f64 {
        self.checkpoints.last().map_or(f64::NAN, |c| c.objective)
    }
}

struct Recorder {
    n: usize,
    stride: u64,
    checkpoints: Vec<Checkpoint>,
}

impl Recorder {
    fn new(n: usize, stride: u64) -> Self {
        Self {
            n,
            stride: stride.max(1),
            checkpoints: Vec::new(),
        }
    }

    fn push(&mut self, flops: u64, objective: f64, accuracy: f64) {
        if self.checkpoints.last().is_some_and(|c| c.flops >= flops) {
            return;
        }
        self.checkpoints.push(Checkpoint {
            flops,
            normalized_flops: flops as f64 / self.n as f64,
            objective,
            accuracy,
        });
    }

    fn due(&self, flops: u64) -> bool {
        self.checkpoints.last().is_none_or(|c| flops >= c.flops + self.stride)
    }
}

/// Per-row argmax; ties go to the lowest class id.
pub fn assign_labels(z: &Array2<f64>) -> Vec<usize> {
    z.rows().into_iter().map(assign_row).collect()
}

pub(crate) fn assign_row(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Fraction of unlabeled nodes (with known ground truth) assigned correctly.
pub fn accuracy(assignment: &[usize], ground_truth: &[Option<usize>], observed: &[usize]) -> Result<f64> {
    if assignment.len() != ground_truth.len() {
        return Err(Error::DimensionError {
            expected: format!("{} assignments", ground_truth.len()),
            found: assignment.len().to_string(),
        });
    }
    let mut is_observed = vec![false; ground_truth.len()];
    for &u in observed {
        if let Some(flag) = is_observed.get_mut(u) {
            *flag = true;
        }
    }
    let (mut hits, mut total) = (0usize, 0usize);
    for (u, truth) in ground_truth.iter().enumerate() {
        if let (false, Some(c)) = (is_observed[u], truth) {
            total += 1;
            hits += usize::from(assignment[u] == *c);
        }
    }
    if total == 0 {
        return Err(Error::Undefined);
    }
    Ok(hits as f64 / total as f64)
}

fn initial_scores(problem: &Problem, opts: &SolverOptions) -> Result<Array2<f64>> {
    match &opts.initial {
        Some(z) => {
            problem.check_shape(z)?;
            Ok(z.clone())
        }
        None => Ok(Array2::zeros((problem.n(), problem.m()))),
    }
}

fn finish(method: Method, problem: &Problem, opts: &SolverOptions, rec: Recorder, state: ScoreState) -> SolverTrace {
    let grad_inf_norm = state.grad_inf_norm();
    let tol_missed = opts
        .grad_tol
        .is_some_and(|tol| grad_inf_norm.is_nan() || grad_inf_norm > tol);
    let failed = tol_missed || !state.objective().is_finite();
    SolverTrace {
        method,
        p: problem.p(),
        seed: opts.seed,
        n: problem.n(),
        checkpoints: rec.checkpoints,
        assignment: state.assignment().to_vec(),
        scores: state.into_scores(),
        grad_inf_norm,
        failed,
    }
}

/// Run `method` on `problem`.
pub fn solve(problem: &Problem, method: Method, opts: &SolverOptions) -> Result<SolverTrace> {
    match method {
        Method::Gd => run_gd(problem, opts),
        Method::Ccd => run_ccd(problem, opts),
        Method::Rcd => run_rcd(problem, opts),
        Method::Gcd => run_gcd(problem, opts),
    }
}

/// Full gradient descent `Z ← Z − α∇θ(Z)`; each iteration costs `n` flops.
pub fn run_gd(problem: &Problem, opts: &SolverOptions) -> Result<SolverTrace> {
    let n = problem.n();
    let mut state = init_state(problem, initial_scores(problem, opts)?)?;
    let alpha = opts
        .stepsize
        .unwrap_or_else(|| objective::global_stepsize(problem, &state));
    let safeguard = problem.p() != 2.0;
    let mut rec = Recorder::new(n, opts.checkpoint_stride.unwrap_or_else(|| default_stride(n)));
    rec.push(0, state.objective(), state.accuracy());

    while state.flops() + n as u64 <= opts.budget_flops {
        if opts.grad_tol.is_some_and(|tol| state.grad_inf_norm() <= tol) {
            break;
        }
        let current = state.objective();
        let mut step = alpha;
        let mut next = None;
        for _ in 0..=MAX_HALVINGS {
            let z = state.scores() - &(state.gradient() * step);
            let value = objective::evaluate(problem, &z)?;
            if !safeguard || value <= current {
                next = Some(z);
                break;
            }
            step *= 0.5;
        }
        let flops = state.flops() + n as u64;
        if let Some(z) = next {
            state = init_state(problem, z)?;
        }
        state.add_flops(flops - state.flops());
        if rec.due(state.flops()) {
            rec.push(state.flops(), state.objective(), state.accuracy());
        }
        if !state.objective().is_finite() {
            break;
        }
    }
    rec.push(state.flops(), state.objective(), state.accuracy());
    Ok(finish(Method::Gd, problem, opts, rec, state))
}

/// Cyclic order over `0..n`, reshuffled after every full pass.
#[derive(Debug, Clone)]
pub struct CyclicOrder {
    order: Vec<usize>,
    next: usize,
    rng: ChaCha8Rng,
}

impl CyclicOrder {
    /// Seeded order; the first pass is already shuffled.
    pub fn new(n: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Self { order, next: 0, rng }
    }

    /// Start from a given first-pass permutation.
    pub fn with_first_pass(order: Vec<usize>, seed: u64) -> Self {
        Self {
            order,
            next: 0,
            rng: seeded_rng(seed),
        }
    }

    pub fn next_index(&mut self) -> usize {
        if self.next == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.next = 0;
        }
        let i = self.order[self.next];
        self.next += 1;
        i
    }
}

/// Uniform index sampler with replacement.
#[derive(Debug, Clone)]
pub struct UniformIndex {
    n: usize,
    rng: ChaCha8Rng,
}

impl UniformIndex {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            rng: seeded_rng(seed),
        }
    }

    pub fn next_index(&mut self) -> usize {
        self.rng.gen_range(0..self.n)
    }
}

enum Selector {
    Cyclic(CyclicOrder),
    Uniform(UniformIndex),
    Greedy,
}

/// Per-coordinate stepsizes: `1/L_i` for p = 2, the shared bound otherwise.
enum Steps {
    PerNode(Vec<f64>),
    Fixed(f64),
}

impl Steps {
    fn for_problem(problem: &Problem, state: &ScoreState, opts: &SolverOptions) -> Result<Self> {
        if let Some(alpha) = opts.stepsize {
            return Ok(Steps::Fixed(alpha));
        }
        if problem.p() == 2.0 {
            let alphas = (0..problem.n())
                .map(|i| objective::coordinate_lipschitz(problem, i).map(|l| 1.0 / l))
                .collect::<Result<Vec<_>>>()?;
            Ok(Steps::PerNode(alphas))
        } else {
            Ok(Steps::Fixed(objective::global_stepsize(problem, state)))
        }
    }

    #[inline]
    fn at(&self, i: usize) -> f64 {
        match self {
            Steps::PerNode(a) => a[i],
            Steps::Fixed(a) => *a,
        }
    }
}

/// One safeguarded coordinate move; returns whether `Z` changed.
fn coordinate_move(
    problem: &Problem,
    state: &mut ScoreState,
    i: usize,
    j: usize,
    alpha: f64,
    safeguard: bool,
) -> Result<bool> {
    let g = state.gradient()[[i, j]];
    if g == 0.0 {
        return Ok(false);
    }
    let mut step = -alpha * g;
    let mut delta = objective::delta_objective(problem, state, i, j, step)?;
    if safeguard {
        let mut halvings = 0;
        while delta > 0.0 && halvings < MAX_HALVINGS {
            step *= 0.5;
            delta = objective::delta_objective(problem, state, i, j, step)?;
            halvings += 1;
        }
        if delta > 0.0 {
            return Ok(false);
        }
    }
    state.apply_step_with_delta(problem, i, j, step, delta);
    Ok(true)
}

fn run_coordinate(problem: &Problem, opts: &SolverOptions, method: Method) -> Result<SolverTrace> {
    let n = problem.n();
    let m = problem.m();
    let mut state = init_state(problem, initial_scores(problem, opts)?)?;
    let mut selector = match method {
        Method::Ccd => Selector::Cyclic(CyclicOrder::new(n, opts.seed)),
        Method::Rcd => Selector::Uniform(UniformIndex::new(n, opts.seed)),
        Method::Gcd => {
            state.enable_heaps();
            Selector::Greedy
        }
        Method::Gd => unreachable!("gradient descent is not a coordinate method"),
    };
    let steps = Steps::for_problem(problem, &state, opts)?;
    let safeguard = problem.p() != 2.0;
    let mut rec = Recorder::new(n, opts.checkpoint_stride.unwrap_or_else(|| default_stride(n)));
    rec.push(0, state.objective(), state.accuracy());

    while state.flops() < opts.budget_flops {
        if let Some(tol) = opts.grad_tol {
            let check = match selector {
                Selector::Greedy => true,
                _ => state.flops() % n as u64 == 0,
            };
            if check && converged(&state, &selector, m, tol) {
                break;
            }
        }
        match &mut selector {
            Selector::Cyclic(order) => {
                let i = order.next_index();
                for j in 0..m {
                    coordinate_move(problem, &mut state, i, j, steps.at(i), safeguard)?;
                }
            }
            Selector::Uniform(sampler) => {
                let i = sampler.next_index();
                for j in 0..m {
                    coordinate_move(problem, &mut state, i, j, steps.at(i), safeguard)?;
                }
            }
            Selector::Greedy => {
                for j in 0..m {
                    let (i, _) = state.heap_top(j).expect("heaps enabled");
                    coordinate_move(problem, &mut state, i, j, steps.at(i), safeguard)?;
                }
            }
        }
        state.add_flops(1);
        if rec.due(state.flops()) {
            rec.push(state.flops(), state.objective(), state.accuracy());
        }
        if !state.objective().is_finite() {
            break;
        }
    }
    rec.push(state.flops(), state.objective(), state.accuracy());
    Ok(finish(method, problem, opts, rec, state))
}

fn converged(state: &ScoreState, selector: &Selector, m: usize, tol: f64) -> bool {
    match selector {
        Selector::Greedy => (0..m).all(|j| state.heap_top(j).is_none_or(|(_, g)| g <= tol)),
        _ => state.grad_inf_norm() <= tol,
    }
}

/// Cyclic coordinate descent with a seeded reshuffle after every pass.
pub fn run_ccd(problem: &Problem, opts: &SolverOptions) -> Result<SolverTrace> {
    run_coordinate(problem, opts, Method::Ccd)
}

/// Random coordinate descent, indices drawn uniformly with replacement.
pub fn run_rcd(problem: &Problem, opts: &SolverOptions) -> Result<SolverTrace> {
    run_coordinate(problem, opts, Method::Rcd)
}

/// Greedy (Gauss–Southwell) coordinate descent: each class moves its
/// largest `|∇θ|` entry, found through a per-class max-heap.
pub fn run_gcd(problem: &Problem, opts: &SolverOptions) -> Result<SolverTrace> {
    run_coordinate(problem, opts, Method::Gcd)
}

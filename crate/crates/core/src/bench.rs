//! Multi-run experiments and gate tables.
//!
//! A gate `g` is hit by a run at the first checkpoint whose relative residual
//! drops to `g` or below. Residuals are measured against the best value any
//! method reached on the same instance within the budget. Runs that never hit
//! a gate count as failures for it and are left out of the flop statistics.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hypergraph::MultilayerHypergraph;
use crate::objective::{build_label_matrix, Problem};
use crate::rng::derive_seed;
use crate::sbm::{generate_sbm, sample_observed, SbmSpec};
use crate::solvers::{solve, Checkpoint, Method, SolverOptions, SolverTrace};

pub const DEFAULT_GATES: [f64; 5] = [0.75, 0.5, 0.25, 0.1, 0.05];

/// Column order used by the tables.
pub const TABLE_ORDER: [Method; 4] = [Method::Ccd, Method::Rcd, Method::Gcd, Method::Gd];

/// Checkpoints of one run, detached from the solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunCurve {
    pub method: Method,
    pub seed: u64,
    pub checkpoints: Vec<Checkpoint>,
}

impl From<&SolverTrace> for RunCurve {
    fn from(t: &SolverTrace) -> Self {
        Self {
            method: t.method,
            seed: t.seed,
            checkpoints: t.checkpoints.clone(),
        }
    }
}

/// All runs made on one problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRuns {
    pub label: String,
    pub runs: Vec<RunCurve>,
}

/// One trace per `(method, seed)` on `problem`, each with `budget_flops`.
pub fn run_experiment(
    problem: &Problem,
    methods: &[Method],
    budget_flops: u64,
    seeds: &[u64],
    stride: Option<u64>,
) -> Result<Vec<SolverTrace>> {
    let jobs: Vec<(Method, u64)> = methods
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    jobs.par_iter()
        .map(|&(method, seed)| {
            let opts = SolverOptions {
                checkpoint_stride: stride,
                ..SolverOptions::with_budget(budget_flops).seed(seed)
            };
            solve(problem, method, &opts)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracyGate {
    /// `(a* − a_k)/(a* − a_0) <= g`
    Relative,
    /// `1 − a_k <= g`
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateMetric {
    Objective,
    Accuracy(AccuracyGate),
}

impl GateMetric {
    pub fn name(self) -> &'static str {
        match self {
            GateMetric::Objective => "objective",
            GateMetric::Accuracy(_) => "accuracy",
        }
    }
}

/// Best objective (minimum) and best accuracy (maximum) over every run.
pub fn instance_references(instance: &InstanceRuns) -> (f64, f64) {
    let all = instance.runs.iter().flat_map(|r| r.checkpoints.iter());
    let mut best_obj = f64::INFINITY;
    let mut best_acc = f64::NEG_INFINITY;
    for c in all {
        if c.objective.is_finite() {
            best_obj = best_obj.min(c.objective);
        }
        if c.accuracy.is_finite() {
            best_acc = best_acc.max(c.accuracy);
        }
    }
    (best_obj, best_acc)
}

/// Normalized flop count at which `curve` first hits `gate`, if ever.
pub fn gate_hit(curve: &RunCurve, best: f64, gate: f64, metric: GateMetric) -> Option<f64> {
    let first = curve.checkpoints.first()?;
    let residual: Box<dyn Fn(&Checkpoint) -> f64> = match metric {
        GateMetric::Objective => {
            let span = first.objective - best;
            if span.is_nan() || span <= 0.0 {
                return Some(first.normalized_flops);
            }
            Box::new(move |c| (c.objective - best) / span)
        }
        GateMetric::Accuracy(AccuracyGate::Relative) => {
            let span = best - first.accuracy;
            if span.is_nan() || span <= 0.0 {
                return first.accuracy.is_finite().then_some(first.normalized_flops);
            }
            Box::new(move |c| (best - c.accuracy) / span)
        }
        GateMetric::Accuracy(AccuracyGate::Absolute) => Box::new(|c| 1.0 - c.accuracy),
    };
    curve
        .checkpoints
        .iter()
        .find(|c| residual(c) <= gate)
        .map(|c| c.normalized_flops)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateCell {
    /// Mean normalized flops over successful runs; `None` if all failed.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub fail: f64,
    pub runs: usize,
}

impl GateCell {
    pub fn from_hits(hits: &[Option<f64>]) -> Self {
        let ok: Vec<f64> = hits.iter().flatten().copied().collect();
        let runs = hits.len();
        let fail = if runs == 0 {
            0.0
        } else {
            (runs - ok.len()) as f64 / runs as f64
        };
        if ok.is_empty() {
            return Self {
                mean: None,
                std: None,
                fail,
                runs,
            };
        }
        let mean = ok.iter().sum::<f64>() / ok.len() as f64;
        let std = if ok.len() < 2 {
            0.0
        } else {
            (ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
        };
        Self {
            mean: Some(mean),
            std: Some(std),
            fail,
            runs,
        }
    }
}

/// Gate statistics, `cells[g][k]` for `gates[g]` and `methods[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateReport {
    pub metric: GateMetric,
    pub gates: Vec<f64>,
    pub methods: Vec<Method>,
    pub cells: Vec<Vec<GateCell>>,
}

impl GateReport {
    pub fn cell(&self, method: Method, gate: f64) -> Option<&GateCell> {
        let k = self.methods.iter().position(|&m| m == method)?;
        let g = self.gates.iter().position(|&x| x == gate)?;
        Some(&self.cells[g][k])
    }

    /// Plain-text table in the usual `flop (mean ± std) | fail` layout.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<6}", "gate");
        for m in &self.methods {
            let _ = write!(
                out,
                " | {:>13} {:>5}",
                format!("{} flop", m.as_str().to_uppercase()),
                "fail"
            );
        }
        out.push('\n');
        for (g, row) in self.gates.iter().zip(&self.cells) {
            let _ = write!(out, "{g:<6}");
            for c in row {
                let flop = match (c.mean, c.std) {
                    (Some(m), Some(s)) => format!("{m:.2}±{s:.2}"),
                    _ => "-".to_string(),
                };
                let _ = write!(out, " | {flop:>13} {:>5.2}", c.fail);
            }
            out.push('\n');
        }
        out
    }
}

/// Gate statistics per method over all instances.
pub fn gate_stats(instances: &[InstanceRuns], gates: &[f64], metric: GateMetric) -> GateReport {
    let methods: Vec<Method> = TABLE_ORDER
        .into_iter()
        .filter(|m| instances.iter().any(|i| i.runs.iter().any(|r| r.method == *m)))
        .collect();
    let mut hits = vec![vec![Vec::new(); methods.len()]; gates.len()];
    for inst in instances {
        let (best_obj, best_acc) = instance_references(inst);
        let best = match metric {
            GateMetric::Objective => best_obj,
            GateMetric::Accuracy(_) => best_acc,
        };
        for run in &inst.runs {
            let k = methods.iter().position(|&m| m == run.method).expect("collected above");
            for (g, &gate) in gates.iter().enumerate() {
                hits[g][k].push(gate_hit(run, best, gate, metric));
            }
        }
    }
    let cells = hits
        .iter()
        .map(|row| row.iter().map(|h| GateCell::from_hits(h)).collect())
        .collect();
    GateReport {
        metric,
        gates: gates.to_vec(),
        methods,
        cells,
    }
}

/// CSV with columns `gate` and `<method>_flop_mean,<method>_flop_std,<method>_fail`;
/// absent means are written as `-`.
pub fn aggregate_tables(report: &GateReport, path: &Path, comments: &[String]) -> Result<()> {
    let mut text = String::new();
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(text, "# {line}");
        }
    }
    text.push_str(&table_csv(report));
    write_file(path, text.as_bytes())
}

/// CSV body of [`aggregate_tables`].
pub fn table_csv(report: &GateReport) -> String {
    let mut text = String::from("gate");
    for m in &report.methods {
        let _ = write!(text, ",{m}_flop_mean,{m}_flop_std,{m}_fail");
    }
    text.push('\n');
    if report.methods.is_empty() {
        return text;
    }
    for (gate, row) in report.gates.iter().zip(&report.cells) {
        let _ = write!(text, "{gate}");
        for c in row {
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
            let _ = write!(text, ",{},{},{:.4}", fmt(c.mean), fmt(c.std), c.fail);
        }
        text.push('\n');
    }
    text
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    f.write_all(bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// gnuplot data file: one indexed block per run with columns
/// `normalized_flops objective accuracy`.
pub fn write_curves(path: &Path, instances: &[InstanceRuns], comments: &[String]) -> Result<()> {
    let mut text = String::new();
    for c in comments {
        let _ = writeln!(text, "# {c}");
    }
    let mut first = true;
    for inst in instances {
        for run in &inst.runs {
            if !first {
                text.push_str("\n\n");
            }
            first = false;
            let _ = writeln!(
                text,
                "# instance={} method={} seed={}",
                inst.label, run.method, run.seed
            );
            for c in &run.checkpoints {
                let _ = writeln!(text, "{} {} {}", c.normalized_flops, c.objective, c.accuracy);
            }
        }
    }
    write_file(path, text.as_bytes())
}

/// Synthetic planted-partition sweep: one instance per
/// `(ratio, perc, replicate, p)`, each with a fresh graph and label sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSweep {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub ratios: Vec<f64>,
    pub percs: Vec<f64>,
    pub replicates: usize,
    pub base_seed: u64,
    pub p_values: Vec<f64>,
    pub methods: Vec<Method>,
    pub lambda: f64,
    pub budget_multiplier: f64,
    pub stride: Option<u64>,
}

impl SbmSweep {
    /// The planted-partition setting: 4 blocks of 125, `p_in = 0.2`,
    /// ratios {2, 2.5, 3, 3.5}, 3 to 12% labels, 5 replicates, p = 2.
    pub fn standard(base_seed: u64) -> Self {
        Self {
            block_sizes: vec![125; 4],
            p_in: 0.2,
            ratios: vec![2.0, 2.5, 3.0, 3.5],
            percs: vec![3.0, 6.0, 9.0, 12.0],
            replicates: 5,
            base_seed,
            p_values: vec![2.0],
            methods: TABLE_ORDER.to_vec(),
            lambda: 1.0,
            budget_multiplier: 4.0,
            stride: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepInstance {
    pub label: String,
    pub ratio: f64,
    pub perc: f64,
    pub replicate: usize,
    pub p: f64,
    pub n: usize,
    pub graph_seed: u64,
    pub sample_seed: u64,
    pub traces: Vec<SolverTrace>,
}

impl SweepInstance {
    pub fn runs(&self) -> InstanceRuns {
        InstanceRuns {
            label: self.label.clone(),
            runs: self.traces.iter().map(RunCurve::from).collect(),
        }
    }
}

/// `⌊multiplier · n⌋` flops.
pub fn budget_for(n: usize, multiplier: f64) -> u64 {
    (multiplier * n as f64).floor() as u64
}

/// Run every instance of the sweep; results come back in a fixed order
/// regardless of scheduling.
pub fn run_sbm_sweep(sweep: &SbmSweep) -> Result<Vec<SweepInstance>> {
    if sweep.ratios.iter().any(|r| r.is_nan() || *r <= 0.0) {
        return Err(Error::InvalidParameter("ratios must be positive".into()));
    }
    let mut cells = Vec::new();
    for (ri, &ratio) in sweep.ratios.iter().enumerate() {
        for (pi, &perc) in sweep.percs.iter().enumerate() {
            for k in 0..sweep.replicates {
                for &p in &sweep.p_values {
                    cells.push((ri, ratio, pi, perc, k, p));
                }
            }
        }
    }
    cells
        .par_iter()
        .map(|&(ri, ratio, pi, perc, k, p)| {
            let tags = [ri as u64, pi as u64, k as u64];
            let graph_seed = derive_seed(sweep.base_seed, &[tags[0], tags[1], tags[2], 0]);
            let sample_seed = derive_seed(sweep.base_seed, &[tags[0], tags[1], tags[2], 1]);
            let method_seed = derive_seed(sweep.base_seed, &[tags[0], tags[1], tags[2], 2]);
            let spec = SbmSpec {
                block_sizes: sweep.block_sizes.clone(),
                p_in: sweep.p_in,
                p_out: sweep.p_in / ratio,
                seed: graph_seed,
            };
            let (graph, truth) = generate_sbm(&spec)?;
            let observed = sample_observed(&truth, perc, sample_seed)?;
            let n = graph.n();
            let m = sweep.block_sizes.len();
            let gt: Vec<Option<usize>> = truth.iter().map(|&c| Some(c)).collect();
            let labels = build_label_matrix(&gt, &observed, m, n)?;
            let problem = Problem::new(&graph, labels, p, &[sweep.lambda])?;
            let traces = run_experiment(
                &problem,
                &sweep.methods,
                budget_for(n, sweep.budget_multiplier),
                &[method_seed],
                sweep.stride,
            )?;
            Ok(SweepInstance {
                label: format!("ratio{ratio}_perc{perc}_rep{k}_p{p}"),
                ratio,
                perc,
                replicate: k,
                p,
                n,
                graph_seed,
                sample_seed,
                traces,
            })
        })
        .collect()
}

/// Label-sampling sweep on a fixed hypergraph with complete ground truth:
/// one instance per `(perc, replicate, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSweep {
    pub percs: Vec<f64>,
    pub replicates: usize,
    pub base_seed: u64,
    pub p_values: Vec<f64>,
    pub methods: Vec<Method>,
    pub lambdas: Vec<f64>,
    pub budget_multiplier: f64,
    pub stride: Option<u64>,
}

pub fn run_dataset_sweep(
    graph: &MultilayerHypergraph,
    truth: &[usize],
    sweep: &DatasetSweep,
) -> Result<Vec<SweepInstance>> {
    let m = truth.iter().max().map_or(0, |&c| c + 1);
    let gt: Vec<Option<usize>> = truth.iter().map(|&c| Some(c)).collect();
    let mut cells = Vec::new();
    for (pi, &perc) in sweep.percs.iter().enumerate() {
        for k in 0..sweep.replicates {
            for &p in &sweep.p_values {
                cells.push((pi, perc, k, p));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(pi, perc, k, p)| {
            let sample_seed = derive_seed(sweep.base_seed, &[pi as u64, k as u64, 1]);
            let method_seed = derive_seed(sweep.base_seed, &[pi as u64, k as u64, 2]);
            let observed = sample_observed(truth, perc, sample_seed)?;
            let labels = build_label_matrix(&gt, &observed, m, graph.n())?;
            let problem = Problem::new(graph, labels, p, &sweep.lambdas)?;
            let traces = run_experiment(
                &problem,
                &sweep.methods,
                budget_for(graph.n(), sweep.budget_multiplier),
                &[method_seed],
                sweep.stride,
            )?;
            Ok(SweepInstance {
                label: format!("perc{perc}_rep{k}_p{p}"),
                ratio: f64::NAN,
                perc,
                replicate: k,
                p,
                n: graph.n(),
                graph_seed: 0,
                sample_seed,
                traces,
            })
        })
        .collect()
}

/// Best final accuracy over methods, averaged over the instances of each `p`:
/// `(p, mean, sample std, instance count)`.
pub fn accuracy_by_p(instances: &[SweepInstance]) -> Vec<(f64, f64, f64, usize)> {
    let mut ps: Vec<f64> = instances.iter().map(|i| i.p).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    ps.into_iter()
        .map(|p| {
            let best: Vec<f64> = instances
                .iter()
                .filter(|i| i.p == p)
                .map(|i| {
                    i.traces
                        .iter()
                        .filter_map(|t| t.checkpoints.last().map(|c| c.accuracy))
                        .filter(|a| a.is_finite())
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .filter(|a| a.is_finite())
                .collect();
            let cell = GateCell::from_hits(&best.iter().map(|&a| Some(a)).collect::<Vec<_>>());
            (
                p,
                cell.mean.unwrap_or(f64::NAN),
                cell.std.unwrap_or(f64::NAN),
                best.len(),
            )
        })
        .collect()
}

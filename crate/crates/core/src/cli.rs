//! Command-line interface: `generate-sbm`, `solve`, `bench` and `aggregate`.
//!
//! Exit status is 0 on success, 2 on a usage error and 1 when a command
//! fails at run time. Every file written carries `#` header lines with the
//! resolved configuration, and identical flags give byte-identical output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::bench::{
    accuracy_by_p, aggregate_tables, budget_for, gate_stats, run_dataset_sweep, run_sbm_sweep, write_curves,
    AccuracyGate, DatasetSweep, GateMetric, InstanceRuns, RunCurve, SbmSweep, SweepInstance, DEFAULT_GATES,
};
use crate::error::Error;
use crate::io;
use crate::objective::{build_label_matrix, Problem};
use crate::sbm::{generate_sbm, sample_observed, SbmSpec};
use crate::solvers::{solve, Method, SolverOptions};

#[derive(Debug, Parser)]
#[command(
    name = "hypercd",
    version,
    about = "Label inference on multilayer hypergraphs by coordinate descent"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a planted-partition graph and write it with its ground truth.
    GenerateSbm(GenerateSbmArgs),
    /// Run one solver on a hypergraph and write its trace and assignment.
    Solve(SolveArgs),
    /// Run a multi-seed sweep and write gate tables.
    Bench(BenchArgs),
    /// Recompute gate tables from trace directories.
    Aggregate(AggregateArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("inter").required(true).args(["p_out", "ratio"])))]
pub struct GenerateSbmArgs {
    /// Comma-separated block sizes.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub blocks: Vec<usize>,
    #[arg(long, value_parser = parse_probability)]
    pub p_in: f64,
    #[arg(long, value_parser = parse_probability)]
    pub p_out: Option<f64>,
    /// Sets `p_out = p_in / ratio`.
    #[arg(long, value_parser = parse_positive)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Ground truth CSV `node_id,class_id`; fixes the number of classes.
    #[arg(long)]
    pub labels: PathBuf,
    /// Observed nodes CSV `node_id`.
    #[arg(long, conflicts_with = "perc", required_unless_present = "perc")]
    pub observed: Option<PathBuf>,
    /// Sample this percentage of every class as observed.
    #[arg(long, value_parser = parse_percentage, requires = "sample_seed")]
    pub perc: Option<f64>,
    #[arg(long, requires = "perc")]
    pub sample_seed: Option<u64>,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value_t = 2.0, value_parser = parse_exponent)]
    pub p: f64,
    /// Per-layer weights; defaults to the manifest values.
    #[arg(long, value_delimiter = ',', value_parser = parse_nonnegative)]
    pub lambda: Vec<f64>,
    /// Flop budget as a multiple of the node count.
    #[arg(long, default_value_t = 4.0, value_parser = parse_positive)]
    pub budget_multiplier: f64,
    /// Absolute flop budget; overrides `--budget-multiplier`.
    #[arg(long)]
    pub budget_flops: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub stride: Option<u64>,
    #[arg(long, value_parser = parse_positive)]
    pub stepsize: Option<f64>,
    /// Stop once the gradient sup-norm drops to this value.
    #[arg(long, value_parser = parse_positive)]
    pub grad_tol: Option<f64>,
    /// Required by the randomized methods.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AccuracyGateArg {
    Relative,
    Absolute,
}

impl From<AccuracyGateArg> for AccuracyGate {
    fn from(a: AccuracyGateArg) -> Self {
        match a {
            AccuracyGateArg::Relative => AccuracyGate::Relative,
            AccuracyGateArg::Absolute => AccuracyGate::Absolute,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GateArgs {
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GATES.to_vec(), value_parser = parse_nonnegative)]
    pub gates: Vec<f64>,
    #[arg(long, value_enum, default_value_t = AccuracyGateArg::Relative)]
    pub accuracy_gates: AccuracyGateArg,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["manifest", "blocks"])))]
pub struct BenchArgs {
    /// Dataset mode: hypergraph manifest (needs `--labels`).
    #[arg(long, requires = "labels")]
    pub manifest: Option<PathBuf>,
    #[arg(long, requires = "manifest")]
    pub labels: Option<PathBuf>,
    /// Synthetic mode: comma-separated block sizes.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub blocks: Vec<usize>,
    #[arg(long, default_value_t = 0.2, value_parser = parse_probability)]
    pub p_in: f64,
    /// Ratios `p_in / p_out` of the synthetic sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 2.5, 3.0, 3.5], value_parser = parse_positive)]
    pub ratios: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![3.0, 6.0, 9.0, 12.0], value_parser = parse_percentage)]
    pub perc: Vec<f64>,
    /// Number of random instances per setting.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    /// Base seed every instance seed is derived from.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = vec!["ccd".to_string(), "rcd".into(), "gcd".into(), "gd".into()])]
    pub methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![2.0], value_parser = parse_exponent)]
    pub p: Vec<f64>,
    /// Per-layer weights; defaults to the manifest values (synthetic: 1).
    #[arg(long, value_delimiter = ',', value_parser = parse_nonnegative)]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = 4.0, value_parser = parse_positive)]
    pub budget_multiplier: f64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub stride: Option<u64>,
    #[command(flatten)]
    pub gates: GateArgs,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Directory with one subdirectory of trace CSVs per instance.
    #[arg(long)]
    pub traces: PathBuf,
    #[command(flatten)]
    pub gates: GateArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Failure of a command, split by exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parse `args` (program name first), run, and return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenerateSbm(a) => cmd_generate_sbm(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Aggregate(a) => cmd_aggregate(&a),
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|e| format!("`{s}`: {e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_probability(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn parse_nonnegative(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be nonnegative"))
    }
}

fn parse_exponent(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 1.0 {
        Ok(v)
    } else {
        Err(format!("p = {v} must be at least 1"))
    }
}

fn parse_percentage(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 100.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not a percentage in (0, 100]"))
    }
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Shortest decimal form after rounding to 12 significant digits, so that
/// derived values such as `0.2 / 2.5` print as `0.08`.
pub fn fmt_param(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    rounded.to_string()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_param(x)).collect::<Vec<_>>().join(",")
}

fn resolve_lambdas(given: &[f64], defaults: Vec<f64>) -> CliResult<Vec<f64>> {
    if given.is_empty() {
        return Ok(defaults);
    }
    if given.len() != defaults.len() {
        return Err(CliError::Usage(format!(
            "--lambda has {} values but the hypergraph has {} layers",
            given.len(),
            defaults.len()
        )));
    }
    Ok(given.to_vec())
}

fn parse_methods(names: &[String]) -> CliResult<Vec<Method>> {
    let mut out = Vec::new();
    for name in names {
        let m: Method = name.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("--methods is empty".into()));
    }
    Ok(out)
}

fn warn_layers(loaded: &io::LoadedHypergraph) {
    for (path, w) in &loaded.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
}

pub fn cmd_generate_sbm(a: &GenerateSbmArgs) -> CliResult<()> {
    let p_out = match (a.p_out, a.ratio) {
        (Some(p), _) => p,
        (None, Some(r)) => a.p_in / r,
        (None, None) => return Err(CliError::Usage("one of --p-out or --ratio is required".into())),
    };
    let spec = SbmSpec {
        block_sizes: a.blocks.clone(),
        p_in: a.p_in,
        p_out,
        seed: a.seed,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (graph, truth) = generate_sbm(&spec)?;
    let mut header = vec![format!(
        "hypercd generate-sbm blocks={} p_in={} p_out={} seed={}",
        join(&spec.block_sizes),
        fmt_param(spec.p_in),
        fmt_param(p_out),
        spec.seed
    )];
    if let Some(r) = a.ratio {
        header.push(format!("ratio={}", fmt_param(r)));
    }
    io::write_layer_file(&a.out_dir.join("layer.txt"), graph.n(), &graph.layers()[0], &header)?;
    io::write_manifest(&a.out_dir.join("manifest.txt"), &[("layer.txt".into(), 1.0)], &header)?;
    io::write_labels(&a.out_dir.join("labels.csv"), &truth, &header)?;
    println!(
        "wrote {} nodes, {} edges to {}",
        graph.n(),
        graph.layers()[0].hyperedges.len(),
        a.out_dir.display()
    );
    Ok(())
}

pub fn cmd_solve(a: &SolveArgs) -> CliResult<()> {
    if a.method.is_randomized() && a.seed.is_none() {
        return Err(CliError::Usage(format!("--seed is required for --method {}", a.method)));
    }
    let loaded = io::load_manifest(&a.manifest)?;
    warn_layers(&loaded);
    let lambdas = resolve_lambdas(&a.lambda, loaded.lambdas.clone())?;
    let graph = &loaded.hypergraph;
    let n = graph.n();
    let (truth, m) = io::read_labels(&a.labels, n)?;
    let observed = match (&a.observed, a.perc, a.sample_seed) {
        (Some(path), _, _) => io::read_observed(path)?,
        (None, Some(perc), Some(seed)) => {
            let full: Option<Vec<usize>> = truth.iter().copied().collect();
            let full =
                full.ok_or_else(|| CliError::Usage("--perc needs a ground truth label for every node".into()))?;
            sample_observed(&full, perc, seed)?
        }
        _ => return Err(CliError::Usage("give --observed or --perc with --sample-seed".into())),
    };
    let labels = build_label_matrix(&truth, &observed, m, n)?;
    let problem = Problem::new(graph, labels, a.p, &lambdas)?;
    let budget = a.budget_flops.unwrap_or_else(|| budget_for(n, a.budget_multiplier));
    let opts = SolverOptions {
        budget_flops: budget,
        checkpoint_stride: a.stride,
        seed: a.seed.unwrap_or(0),
        stepsize: a.stepsize,
        grad_tol: a.grad_tol,
        initial: None,
    };
    let trace = solve(&problem, a.method, &opts)?;

    let mut header = format!(
        "hypercd solve manifest={} labels={} method={} p={} lambda={} budget_flops={} stride={} stepsize={} grad_tol={} seed={}",
        a.manifest.display(),
        a.labels.display(),
        a.method,
        fmt_param(a.p),
        join_f64(&lambdas),
        budget,
        a.stride.map_or("default".into(), |s| s.to_string()),
        a.stepsize.map_or("default".into(), fmt_param),
        a.grad_tol.map_or("none".into(), fmt_param),
        opts.seed,
    );
    match (&a.observed, a.perc, a.sample_seed) {
        (Some(path), _, _) => {
            let _ = write!(header, " observed={}", path.display());
        }
        (None, Some(perc), Some(seed)) => {
            let _ = write!(header, " perc={} sample_seed={seed}", fmt_param(perc));
        }
        _ => {}
    }
    let header = vec![header];
    io::write_trace(&a.out_dir.join("trace.csv"), &trace, &header)?;
    io::write_assignment(&a.out_dir.join("assignment.csv"), &trace.assignment, &header)?;
    if a.perc.is_some() {
        io::write_observed(&a.out_dir.join("observed.csv"), &observed, &header)?;
    }
    let last = trace.checkpoints.last().expect("final checkpoint is always recorded");
    println!(
        "{} p={} flops={} objective={} accuracy={} grad_inf={:e}{}",
        a.method,
        fmt_param(a.p),
        last.flops,
        last.objective,
        last.accuracy,
        trace.grad_inf_norm,
        if trace.failed { " (tolerance not reached)" } else { "" }
    );
    Ok(())
}

fn gate_metrics(g: &GateArgs) -> [GateMetric; 2] {
    [GateMetric::Objective, GateMetric::Accuracy(g.accuracy_gates.into())]
}

fn gate_header(g: &GateArgs) -> String {
    format!(
        "gates={} accuracy_gates={}",
        join_f64(&g.gates),
        match g.accuracy_gates {
            AccuracyGateArg::Relative => "relative",
            AccuracyGateArg::Absolute => "absolute",
        }
    )
}

/// Gate tables (one per metric, and per `p` when several are present),
/// printed and written to `out_dir`.
fn write_gate_tables(
    out_dir: &Path,
    groups: &[(f64, Vec<InstanceRuns>)],
    g: &GateArgs,
    header: &[String],
) -> CliResult<()> {
    let several = groups.len() > 1;
    for (p, runs) in groups {
        for metric in gate_metrics(g) {
            let report = gate_stats(runs, &g.gates, metric);
            let name = if several {
                format!("{}_gates_p{}.csv", metric.name(), fmt_param(*p))
            } else {
                format!("{}_gates.csv", metric.name())
            };
            println!(
                "{} gates, p = {} ({} instances)",
                metric.name(),
                fmt_param(*p),
                runs.len()
            );
            print!("{}", report.render());
            println!();
            aggregate_tables(&report, &out_dir.join(name), header)?;
        }
    }
    Ok(())
}

fn group_by_p(instances: &[SweepInstance]) -> Vec<(f64, Vec<InstanceRuns>)> {
    let mut groups: Vec<(f64, Vec<InstanceRuns>)> = Vec::new();
    for inst in instances {
        match groups.iter_mut().find(|(p, _)| *p == inst.p) {
            Some((_, runs)) => runs.push(inst.runs()),
            None => groups.push((inst.p, vec![inst.runs()])),
        }
    }
    groups
}

pub fn cmd_bench(a: &BenchArgs) -> CliResult<()> {
    let methods = parse_methods(&a.methods)?;
    let mut config = format!(
        "hypercd bench seed={} seeds={} perc={} p={} methods={} budget_multiplier={} stride={} {}",
        a.seed,
        a.seeds,
        join_f64(&a.perc),
        join_f64(&a.p),
        join(&methods),
        fmt_param(a.budget_multiplier),
        a.stride.map_or("default".into(), |s| s.to_string()),
        gate_header(&a.gates),
    );
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = a.jobs {
            b = b.num_threads(j as usize);
        }
        b.build()
            .map_err(|e| CliError::Runtime(Error::InvalidParameter(format!("thread pool: {e}"))))?
    };
    let instances = if let (Some(manifest), Some(labels)) = (&a.manifest, &a.labels) {
        let loaded = io::load_manifest(manifest)?;
        warn_layers(&loaded);
        let lambdas = resolve_lambdas(&a.lambda, loaded.lambdas.clone())?;
        let (truth, _) = io::read_labels(labels, loaded.hypergraph.n())?;
        let truth: Vec<usize> = truth
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| CliError::Usage("bench needs a ground truth label for every node".into()))?;
        let _ = write!(
            config,
            " manifest={} labels={} lambda={}",
            manifest.display(),
            labels.display(),
            join_f64(&lambdas)
        );
        let sweep = DatasetSweep {
            percs: a.perc.clone(),
            replicates: a.seeds as usize,
            base_seed: a.seed,
            p_values: a.p.clone(),
            methods,
            lambdas,
            budget_multiplier: a.budget_multiplier,
            stride: a.stride,
        };
        pool.install(|| run_dataset_sweep(&loaded.hypergraph, &truth, &sweep))?
    } else {
        if a.blocks.contains(&0) {
            return Err(CliError::Usage("block sizes must be positive".into()));
        }
        let lambda = match a.lambda.as_slice() {
            [] => 1.0,
            [l] => *l,
            more => {
                return Err(CliError::Usage(format!(
                    "--lambda has {} values but synthetic graphs have 1 layer",
                    more.len()
                )))
            }
        };
        let _ = write!(
            config,
            " blocks={} p_in={} ratios={} lambda={}",
            join(&a.blocks),
            fmt_param(a.p_in),
            join_f64(&a.ratios),
            fmt_param(lambda)
        );
        let sweep = SbmSweep {
            block_sizes: a.blocks.clone(),
            p_in: a.p_in,
            ratios: a.ratios.clone(),
            percs: a.perc.clone(),
            replicates: a.seeds as usize,
            base_seed: a.seed,
            p_values: a.p.clone(),
            methods,
            lambda,
            budget_multiplier: a.budget_multiplier,
            stride: a.stride,
        };
        pool.install(|| run_sbm_sweep(&sweep))?
    };
    let header = vec![config];

    for inst in &instances {
        let mut run_header = header.clone();
        run_header.push(format!(
            "instance={} perc={} p={} graph_seed={} sample_seed={}",
            inst.label,
            fmt_param(inst.perc),
            fmt_param(inst.p),
            inst.graph_seed,
            inst.sample_seed
        ));
        for t in &inst.traces {
            let path = a
                .out_dir
                .join("traces")
                .join(&inst.label)
                .join(format!("{}_s{}.csv", t.method, t.seed));
            io::write_trace(&path, t, &run_header)?;
        }
    }
    let groups = group_by_p(&instances);
    write_gate_tables(&a.out_dir, &groups, &a.gates, &header)?;

    let runs: Vec<InstanceRuns> = instances.iter().map(SweepInstance::runs).collect();
    write_curves(&a.out_dir.join("curves.dat"), &runs, &header)?;

    let by_p = accuracy_by_p(&instances);
    let mut text = String::new();
    for line in &header {
        let _ = writeln!(text, "# {line}");
    }
    text.push_str("p,accuracy_mean,accuracy_std,instances\n");
    println!("best final accuracy by p");
    for (p, mean, std, count) in &by_p {
        let _ = writeln!(text, "{},{mean:.4},{std:.4},{count}", fmt_param(*p));
        println!("  p = {:<5} {mean:.4} ± {std:.4} ({count} instances)", fmt_param(*p));
    }
    std::fs::write(a.out_dir.join("accuracy_by_p.csv"), text)
        .map_err(|e| CliError::Runtime(Error::io(a.out_dir.join("accuracy_by_p.csv"), e)))?;
    Ok(())
}

fn sorted_entries(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    entries.sort();
    Ok(entries)
}

/// Instances found under `root`: every directory holding `*.csv` traces.
pub fn load_trace_tree(root: &Path) -> CliResult<Vec<(f64, InstanceRuns)>> {
    let mut out = Vec::new();
    for dir in sorted_entries(root)? {
        if !dir.is_dir() {
            continue;
        }
        let mut runs = Vec::new();
        let mut p = None;
        for file in sorted_entries(&dir)? {
            if file.extension().is_none_or(|e| e != "csv") {
                continue;
            }
            let t = io::read_trace(&file)?;
            match p {
                None => p = Some(t.p),
                Some(prev) if prev != t.p => {
                    return Err(CliError::Runtime(Error::parse(
                        &file,
                        0,
                        format!("trace has p = {} but the instance uses p = {prev}", t.p),
                    )))
                }
                Some(_) => {}
            }
            runs.push(RunCurve {
                method: t.method,
                seed: t.seed,
                checkpoints: t.checkpoints,
            });
        }
        if let Some(p) = p {
            let label = dir
                .file_name()
                .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            out.push((p, InstanceRuns { label, runs }));
        }
    }
    Ok(out)
}

pub fn cmd_aggregate(a: &AggregateArgs) -> CliResult<()> {
    let loaded = load_trace_tree(&a.traces)?;
    let mut groups: Vec<(f64, Vec<InstanceRuns>)> = Vec::new();
    for (p, inst) in loaded {
        match groups.iter_mut().find(|(q, _)| *q == p) {
            Some((_, runs)) => runs.push(inst),
            None => groups.push((p, vec![inst])),
        }
    }
    groups.sort_by(|x, y| x.0.total_cmp(&y.0));
    let header = vec![format!(
        "hypercd aggregate traces={} {}",
        a.traces.display(),
        gate_header(&a.gates)
    )];
    write_gate_tables(&a.out_dir, &groups, &a.gates, &header)
}

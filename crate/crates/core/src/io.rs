//! On-disk formats.
//!
//! * Layer file: first line `#nodes <n>`, then one hyperedge per line as
//!   `<weight> <u1> <u2> ... <uk>` (0-based ids, whitespace separated).
//!   Later lines starting with `#` and blank lines are ignored.
//! * Manifest: one `<layer path> <lambda>` per line, paths relative to the
//!   manifest; `lambda` defaults to 1 when omitted. `#` lines are comments.
//! * Labels CSV `node_id,class_id`, observed CSV `node_id`, assignment CSV
//!   `node_id,class_id`, trace CSV
//!   `method,p,seed,flops,normalized_flops,objective,accuracy`. All CSVs may
//!   start with `#` comment lines and carry a header row.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hypergraph::{build_layer, Layer, LayerWarning, MultilayerHypergraph};
use crate::solvers::{Checkpoint, Method, SolverTrace};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_comments(w: &mut impl Write, path: &Path, comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(w, "# {line}").map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

/// `(weight, node ids)` rows as read, before validation.
pub type RawHyperedges = Vec<(f64, Vec<i64>)>;

/// Raw contents of a layer file: node count and unvalidated hyperedges.
pub fn read_layer_file(path: &Path) -> Result<(usize, RawHyperedges)> {
    let reader = open(path)?;
    let mut n = None;
    let mut raw = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let text = line.trim();
        if n.is_none() {
            let count = text
                .strip_prefix("#nodes")
                .ok_or_else(|| Error::parse(path, lineno, "expected `#nodes <n>` on the first line"))?;
            let count = count
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::parse(path, lineno, format!("bad node count: {e}")))?;
            n = Some(count);
            continue;
        }
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut fields = text.split_whitespace();
        let weight = fields
            .next()
            .expect("non-empty line")
            .parse::<f64>()
            .map_err(|e| Error::parse(path, lineno, format!("bad weight: {e}")))?;
        let nodes = fields
            .map(|f| f.parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, lineno, format!("bad node id: {e}")))?;
        if nodes.is_empty() {
            return Err(Error::parse(path, lineno, "hyperedge without nodes"));
        }
        raw.push((weight, nodes));
    }
    let n = n.ok_or_else(|| Error::parse(path, 1, "empty file, expected `#nodes <n>`"))?;
    Ok((n, raw))
}

/// Read and validate a layer file.
pub fn load_layer(path: &Path) -> Result<(usize, Layer, Vec<LayerWarning>)> {
    let (n, raw) = read_layer_file(path)?;
    let (layer, warnings) = build_layer(&raw, n).map_err(|e| match e {
        Error::InvalidNode { .. } | Error::InvalidWeight(_) | Error::EmptyHyperedge(_) | Error::InvalidParameter(_) => {
            Error::parse(path, 0, e.to_string())
        }
        other => other,
    })?;
    Ok((n, layer, warnings))
}

pub fn write_layer_file(path: &Path, n: usize, layer: &Layer, comments: &[String]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "#nodes {n}").map_err(io)?;
    write_comments(&mut w, path, comments)?;
    for e in &layer.hyperedges {
        write!(w, "{}", e.weight).map_err(io)?;
        for u in &e.nodes {
            write!(w, " {u}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub lambda: f64,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let reader = open(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        let (file, lambda) = match fields.as_slice() {
            [file] => (*file, 1.0),
            [file, lambda] => {
                let lambda = lambda
                    .parse::<f64>()
                    .map_err(|e| Error::parse(path, lineno, format!("bad lambda: {e}")))?;
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return Err(Error::parse(path, lineno, format!("lambda must be >= 0, got {lambda}")));
                }
                (*file, lambda)
            }
            _ => return Err(Error::parse(path, lineno, "expected `<layer path> [lambda]`")),
        };
        entries.push(ManifestEntry {
            path: base.join(file),
            lambda,
        });
    }
    if entries.is_empty() {
        return Err(Error::parse(path, 0, "manifest lists no layers"));
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[(String, f64)], comments: &[String]) -> Result<()> {
    let mut w = create(path)?;
    write_comments(&mut w, path, comments)?;
    for (file, lambda) in entries {
        writeln!(w, "{file} {lambda}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Multilayer hypergraph loaded from a manifest.
#[derive(Debug, Clone)]
pub struct LoadedHypergraph {
    pub hypergraph: MultilayerHypergraph,
    pub lambdas: Vec<f64>,
    /// `(layer file, warning)` pairs.
    pub warnings: Vec<(PathBuf, LayerWarning)>,
}

pub fn load_manifest(path: &Path) -> Result<LoadedHypergraph> {
    let entries = read_manifest(path)?;
    let mut n_seen = None;
    let mut layers = Vec::with_capacity(entries.len());
    let mut warnings = Vec::new();
    for entry in &entries {
        let (n, layer, warn) = load_layer(&entry.path)?;
        match n_seen {
            None => n_seen = Some(n),
            Some(prev) if prev != n => {
                return Err(Error::parse(
                    &entry.path,
                    1,
                    format!("layer declares {n} nodes, earlier layers declare {prev}"),
                ))
            }
            Some(_) => {}
        }
        warnings.extend(warn.into_iter().map(|w| (entry.path.clone(), w)));
        layers.push(layer);
    }
    let hypergraph = MultilayerHypergraph::new(n_seen.expect("non-empty manifest"), layers)?;
    Ok(LoadedHypergraph {
        hypergraph,
        lambdas: entries.iter().map(|e| e.lambda).collect(),
        warnings,
    })
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?))
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn is_header(record: &csv::StringRecord, first: &str) -> bool {
    record.get(0) == Some(first)
}

fn parse_field<T: std::str::FromStr>(path: &Path, record: &csv::StringRecord, idx: usize, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let line = record_line(record);
    let field = record
        .get(idx)
        .ok_or_else(|| Error::parse(path, line, format!("missing {what}")))?;
    field
        .parse::<T>()
        .map_err(|e| Error::parse(path, line, format!("bad {what} `{field}`: {e}")))
}

/// Ground truth from a `node_id,class_id` CSV; returns per-node classes
/// (unknown nodes are `None`) and the class count `max id + 1`.
pub fn read_labels(path: &Path, n: usize) -> Result<(Vec<Option<usize>>, usize)> {
    let mut reader = csv_reader(path)?;
    let mut truth = vec![None; n];
    let mut m = 0;
    for record in reader.records() {
        let record = record.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        if is_header(&record, "node_id") {
            continue;
        }
        let line = record_line(&record);
        let node: usize = parse_field(path, &record, 0, "node id")?;
        let class: usize = parse_field(path, &record, 1, "class id")?;
        if node >= n {
            return Err(Error::parse(
                path,
                line,
                format!("node {node} out of range for {n} nodes"),
            ));
        }
        match truth[node] {
            Some(prev) if prev != class => {
                return Err(Error::parse(
                    path,
                    line,
                    format!("node {node} labeled both {prev} and {class}"),
                ))
            }
            _ => truth[node] = Some(class),
        }
        m = m.max(class + 1);
    }
    Ok((truth, m))
}

pub fn read_observed(path: &Path) -> Result<Vec<usize>> {
    let mut reader = csv_reader(path)?;
    let mut nodes = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        if is_header(&record, "node_id") {
            continue;
        }
        nodes.push(parse_field(path, &record, 0, "node id")?);
    }
    Ok(nodes)
}

fn write_pairs(
    path: &Path,
    header: [&str; 2],
    rows: impl Iterator<Item = (usize, usize)>,
    comments: &[String],
) -> Result<()> {
    let mut w = create(path)?;
    write_comments(&mut w, path, comments)?;
    let mut csv = csv::Writer::from_writer(w);
    let err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    csv.write_record(header).map_err(err)?;
    for (a, b) in rows {
        csv.write_record([a.to_string(), b.to_string()]).map_err(err)?;
    }
    csv.flush().map_err(|e| Error::io(path, e))
}

pub fn write_labels(path: &Path, classes: &[usize], comments: &[String]) -> Result<()> {
    write_pairs(
        path,
        ["node_id", "class_id"],
        classes.iter().copied().enumerate(),
        comments,
    )
}

pub fn write_assignment(path: &Path, assignment: &[usize], comments: &[String]) -> Result<()> {
    write_labels(path, assignment, comments)
}

pub fn write_observed(path: &Path, observed: &[usize], comments: &[String]) -> Result<()> {
    let mut w = create(path)?;
    write_comments(&mut w, path, comments)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "node_id").map_err(io)?;
    for u in observed {
        writeln!(w, "{u}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub const TRACE_HEADER: [&str; 7] = [
    "method",
    "p",
    "seed",
    "flops",
    "normalized_flops",
    "objective",
    "accuracy",
];

pub fn write_trace(path: &Path, trace: &SolverTrace, comments: &[String]) -> Result<()> {
    let mut w = create(path)?;
    write_comments(&mut w, path, comments)?;
    let mut csv = csv::Writer::from_writer(w);
    let err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    csv.write_record(TRACE_HEADER).map_err(err)?;
    for c in &trace.checkpoints {
        csv.write_record([
            trace.method.to_string(),
            trace.p.to_string(),
            trace.seed.to_string(),
            c.flops.to_string(),
            c.normalized_flops.to_string(),
            c.objective.to_string(),
            c.accuracy.to_string(),
        ])
        .map_err(err)?;
    }
    csv.flush().map_err(|e| Error::io(path, e))
}

/// Checkpoint rows of a trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub method: Method,
    pub p: f64,
    pub seed: u64,
    pub checkpoints: Vec<Checkpoint>,
}

pub fn read_trace(path: &Path) -> Result<TraceFile> {
    let mut reader = csv_reader(path)?;
    let mut out: Option<TraceFile> = None;
    for record in reader.records() {
        let record = record.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        if is_header(&record, "method") {
            continue;
        }
        let line = record_line(&record);
        let method: Method = parse_field(path, &record, 0, "method")?;
        let p: f64 = parse_field(path, &record, 1, "p")?;
        let seed: u64 = parse_field(path, &record, 2, "seed")?;
        let checkpoint = Checkpoint {
            flops: parse_field(path, &record, 3, "flops")?,
            normalized_flops: parse_field(path, &record, 4, "normalized_flops")?,
            objective: parse_field(path, &record, 5, "objective")?,
            accuracy: parse_field(path, &record, 6, "accuracy")?,
        };
        let file = out.get_or_insert_with(|| TraceFile {
            method,
            p,
            seed,
            checkpoints: Vec::new(),
        });
        if file.method != method || file.seed != seed || file.p != p {
            return Err(Error::parse(path, line, "trace mixes several runs"));
        }
        if file.checkpoints.last().is_some_and(|c| c.flops >= checkpoint.flops) {
            return Err(Error::parse(path, line, "flops must increase strictly"));
        }
        file.checkpoints.push(checkpoint);
    }
    out.ok_or_else(|| Error::parse(path, 0, "trace has no rows"))
}

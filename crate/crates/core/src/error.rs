use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node id {node} out of range for {n} nodes")]
    InvalidNode { node: i64, n: usize },

    #[error("hyperedge weight must be positive and finite, got {0}")]
    InvalidWeight(f64),

    #[error("hyperedge {0} has no nodes")]
    EmptyHyperedge(usize),

    #[error("class id {class} out of range for {m} classes")]
    InvalidClass { class: usize, m: usize },

    #[error("observed node {0} has no known class")]
    MissingLabel(usize),

    #[error("observed set is empty")]
    EmptyObservation,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionError { expected: String, found: String },

    #[error("operation requires p = 2, got p = {0}")]
    WrongMode(f64),

    #[error("index ({node}, {class}) out of range")]
    IndexOutOfRange { node: usize, class: usize },

    #[error("accuracy undefined: no unlabeled node with known ground truth")]
    Undefined,

    #[error("sampling yields zero observed nodes for class {class} (size {size})")]
    EmptyClassSample { class: usize, size: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: u64, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

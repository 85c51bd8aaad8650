use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: column `{column}` not found in header")]
    Schema { column: String },

    #[error("parse error at data row {row}, column `{column}`: cannot read `{value}` as a finite real")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("index error: time index {k} is below the warm-up horizon {warmup}")]
    Index { k: usize, warmup: usize },

    #[error("shape error: {what}: expected {expected}, got {actual}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("objective returned a non-finite value {value} at point {point:?}")]
    NonFiniteObjective { point: Vec<f64>, value: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("search budget exceeded: {structures} structures > limit {limit}")]
    Budget { structures: u64, limit: u64 },

    #[error("incompatible model and data: {0}")]
    Compatibility(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier for the error class, used in machine-readable output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema { .. } => "schema",
            Error::Parse { .. } => "parse",
            Error::InsufficientData(_) => "insufficient_data",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::Split(_) => "split",
            Error::Index { .. } => "index",
            Error::Shape { .. } => "shape",
            Error::Domain(_) => "domain",
            Error::NonFiniteObjective { .. } => "evaluation",
            Error::InvalidParams(_) => "invalid_params",
            Error::ConfigMismatch(_) => "config_mismatch",
            Error::Budget { .. } => "budget",
            Error::Compatibility(_) => "compatibility",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

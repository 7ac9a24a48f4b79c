use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("dimension mismatch at row {row}: expected {expected} features, found {found}")]
    RowDimension {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite feature value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("episode ids must be strictly increasing: {previous} followed by {next}")]
    OutOfOrder { previous: u64, next: u64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    Length { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("stale forward cache: {0}")]
    StaleCache(String),

    #[error("invalid p-value {0}; expected a value in (0, 1]")]
    InvalidPValue(f64),

    #[error("failure proxy is not defined for the {0} family")]
    UnsupportedFamily(&'static str),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

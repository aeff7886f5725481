use std::path::PathBuf;

/// Errors produced by the audit toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("domain error at row {row}, column `{column}`: value {value} is outside [0, 1]")]
    Domain { row: usize, column: String, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("alignment error: expected {expected} rows, found {found}")]
    Alignment { expected: usize, found: usize },

    #[error("degenerate group `{group}`: {reason}")]
    DegenerateGroup { group: String, reason: String },

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("scorer error: {0}")]
    Scorer(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input or configuration rather than
    /// by the environment (I/O, network).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Scorer(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

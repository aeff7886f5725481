use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, configuration, input data or missing prerequisites.
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Core(#[from] margin_audit::error::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for validation failures, 3 for everything else.
    pub fn exit_code(&self) -> u8 {
        let validation = match self {
            CliError::Validation(_) | CliError::Json { .. } => true,
            CliError::Core(e) => e.is_validation(),
            CliError::Io { .. } => false,
        };
        if validation {
            2
        } else {
            3
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

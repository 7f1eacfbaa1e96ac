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

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no embedding found for label {label:?}")]
    MissingLabel { label: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration for `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("unknown {kind} {name:?}")]
    Lookup { kind: &'static str, name: String },

    #[error("instance too large for the reference implementation: {compositions} compositions (limit {limit})")]
    TooLarge { compositions: usize, limit: usize },

    #[error("internal error: {0}")]
    Internal(String),

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

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code for this error: 2 for configuration and validation
    /// problems, 1 for everything that goes wrong at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            _ => 1,
        }
    }
}

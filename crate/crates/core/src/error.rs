use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A row that does not match the documented CSV schema.
    #[error("{file}:{line}: column `{column}`: {message}")]
    Schema {
        file: String,
        line: u64,
        column: String,
        message: String,
    },

    #[error("outcomes reference unknown trials: {}", .0.join(", "))]
    DanglingTrials(Vec<String>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cannot impute censored z-score {direction} {threshold}: no precisely reported value on that side")]
    Imputation { direction: String, threshold: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("complete separation detected on column `{0}`")]
    Separation(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown {kind} `{name}` (available: {})", .available.join(", "))]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: Vec<String>,
    },

    #[error("{dropped} of {total} bootstrap replications failed (limit is 10%)")]
    Bootstrap { dropped: usize, total: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }
}

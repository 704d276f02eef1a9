use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("history encoding: {0}")]
    Encoding(String),

    #[error("capacity exceeded: {what} (limit {limit})")]
    Capacity { what: String, limit: String },

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("signal source exhausted after {completed} of {requested} steps")]
    Truncated { completed: usize, requested: usize },

    #[error("{}:{line}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported source: {0}")]
    UnsupportedSource(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad parameters rather than data or runtime failures.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Capacity { .. } | Error::Encoding(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

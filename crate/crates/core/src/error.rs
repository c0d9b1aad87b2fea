use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("capacity error: requested {requested} items but only {available} are available")]
    Capacity { requested: usize, available: usize },

    #[error("undefined value: {0}")]
    Undefined(String),

    #[error("cache error at {path}: {msg}")]
    Cache { path: PathBuf, msg: String },

    #[error("encoder load error ({path}): {msg}")]
    EncoderLoad { path: PathBuf, msg: String },

    #[error("stale repository: {field} mismatch (repository has {found}, expected {expected})")]
    Stale {
        field: &'static str,
        found: String,
        expected: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

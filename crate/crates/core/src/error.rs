use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A tunable constant is outside its documented range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// Malformed input data (ids out of range, bad distributions, shape mismatch).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("arena generation failed: {0}")]
    Generation(String),

    /// A world or config file could not be decoded.
    #[error("parse error in field `{field}`: {reason}")]
    Parse { field: String, reason: String },

    #[error("distribution for state {state}, action {action} sums to {sum} (expected 1)")]
    Normalization { state: usize, action: usize, sum: f64 },

    #[error("world validation failed: {0}")]
    Validation(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("run with seed {seed} failed: {source}")]
    Run {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

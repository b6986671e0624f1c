use std::path::PathBuf;

use thiserror::Error;

use crate::domain::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input failed a domain invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A pool failed validation; the report lists every problem found.
    #[error("invalid pool: {0}")]
    InvalidPool(ValidationReport),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} did not converge after {iterations} iterations (final change {final_change:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        final_change: f64,
    },

    #[error("matrix is not positive definite even with jitter {jitter:.3e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("strategy {strategy} is not available for learner {learner}")]
    IncompatibleStrategy {
        strategy: &'static str,
        learner: &'static str,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

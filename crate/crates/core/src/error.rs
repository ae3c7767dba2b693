use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MnnError>;

#[derive(Debug, Error)]
pub enum MnnError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerics(String),

    #[error("kernel has no nonzero tap")]
    DegenerateKernel,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("iterates diverged at iteration {iteration}; try a smaller step size (current {step_size:e})")]
    Divergence { iteration: usize, step_size: f64 },

    #[error("inner linear solve did not converge in {iterations} iterations (residual {residual:e})")]
    InnerSolve { iterations: usize, residual: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad file format: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: truncated payload: expected {expected} bytes, found {found}")]
    Truncation {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
}

impl MnnError {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        MnnError::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        MnnError::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MnnError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the numerics rather than by inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            MnnError::Numerics(_) | MnnError::Divergence { .. } | MnnError::InnerSolve { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            MnnError::Io { .. } | MnnError::Format { .. } | MnnError::Truncation { .. }
        )
    }
}

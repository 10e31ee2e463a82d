use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the sampler, the oracles and the experiment runners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("power iteration did not converge after {iterations} iterations (best estimate {best_estimate})")]
    PowerIterationStalled { iterations: usize, best_estimate: f64 },

    #[error("fixed-point solver did not converge at beta={beta}, t={t} (residual {residual:e})")]
    FixedPointStalled { beta: f64, t: f64, residual: f64 },

    #[error("magnetization on the boundary of the hypercube at coordinate {index} (value {value})")]
    BoundaryMagnetization { index: usize, value: f64 },

    #[error("natural gradient descent diverged at iteration {iteration}")]
    Divergence {
        iteration: usize,
        /// Free-energy values visited so far.
        trajectory: Vec<f64>,
    },

    #[error("localization step {step} failed: {source}")]
    LocalizationStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("record contains a non-finite value under key `{key}`")]
    NonFinite { key: String },

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
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

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}x{expected} field, got {found}")]
    DimensionMismatch { expected: usize, found: String },

    /// Negative-order operators are only defined on mean-zero grid functions.
    #[error("field mean {mean:e} exceeds the mean-zero tolerance {tolerance:e}")]
    NonZeroMean { mean: f64, tolerance: f64 },

    #[error("spectral field is not Hermitian: imaginary residual {residual:e} after inversion")]
    NonHermitian { residual: f64 },

    #[error("index {index} out of range (valid: {valid})")]
    IndexOutOfRange { index: usize, valid: String },

    #[error("insufficient history: level {level} needs {needed} previous levels, have {available}")]
    InsufficientHistory { level: usize, needed: usize, available: usize },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("mass drift {drift:e} at step {step} exceeds tolerance {tolerance:e}")]
    MassDrift { step: usize, drift: f64, tolerance: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

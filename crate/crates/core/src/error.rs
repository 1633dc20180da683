use thiserror::Error;

/// Errors raised by the simulator and the steering toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} outside [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("Cholesky factorization of (alpha I + Q) failed (alpha = {alpha:e}, min eigenvalue of Q = {min_eigenvalue:e})")]
    Factorization { alpha: f64, min_eigenvalue: f64 },

    #[error("non-finite state at t = {t} (step {step})")]
    NonFinite { t: f64, step: usize },

    #[error(transparent)]
    Validation(#[from] crate::harness::ValidationReport),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

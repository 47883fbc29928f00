use thiserror::Error;

/// Errors raised by the simulation and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("fit failed after {iterations} iterations: {reason} (last parameters {last:?})")]
    FitFailure {
        reason: String,
        iterations: usize,
        last: Vec<f64>,
    },

    #[error("field extends beyond the SLM pixel range: {clipped_fraction:.3e} of the energy would be clipped")]
    OutOfRange { clipped_fraction: f64 },

    #[error("delay {tau} fs exceeds the aliasing limit of {tau_max:.1} fs")]
    Aliasing { tau: f64, tau_max: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

use thiserror::Error;

use crate::sequence::dsl::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented domain.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    /// A detuning realization does not span the time the sequence needs.
    #[error("signal covers {available:.6e} s but {required:.6e} s are required")]
    Coverage { required: f64, available: f64 },

    #[error("time step {dt:.3e} s is too coarse for correlation time {correlation_time:.3e} s (need dt <= tau_c/10)")]
    TimeStepTooCoarse { dt: f64, correlation_time: f64 },

    #[error("signal model has no analytic power spectral density: {0}")]
    UndefinedSpectrum(String),

    #[error("inconsistent trajectories: {0}")]
    InconsistentTrajectories(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Rejects non-finite or negative values.
pub(crate) fn ensure_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {value}")))
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {value}")))
    }
}

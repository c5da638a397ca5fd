use thiserror::Error;

/// Errors raised by the simulators, solvers and diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RhpError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("hazard undefined beyond support: survival {survival:e} at t = {t}")]
    HazardUndefined { t: f64, survival: f64 },

    #[error("branching ratio must be < 1 (subcriticality), got {alpha}")]
    Supercritical { alpha: f64 },

    #[error("degenerate kernel has no offspring (alpha = 0)")]
    DegenerateKernel,

    #[error("interarrival law has infinite or undefined mean")]
    InfiniteMean,

    #[error("unbounded hazard: supply envelope ({0})")]
    UnboundedHazard(String),

    #[error("renewal density undefined at t = {t} (value {value})")]
    DensityUndefined { t: f64, value: f64 },

    #[error("tied event times at t = {0}")]
    TiedEvents(f64),

    #[error("cluster exceeded the node cap of {cap}")]
    NodeCapExceeded { cap: usize },

    #[error("time {t} lies beyond the stream horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("omitted tail probability {tail:e} exceeds tolerance {tolerance:e}; increase n_max or use the Monte Carlo estimator")]
    TailTooLarge { tail: f64, tolerance: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, RhpError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> RhpError {
    RhpError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

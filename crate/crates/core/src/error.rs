use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no stable fixed point: {0}")]
    NoStableFixedPoint(String),
    #[error("step size underflow at t = {time:e} (h = {step:e})")]
    Stiffness { time: f64, step: f64 },
    #[error("outside validity region: {0}")]
    Domain(String),
    #[error("critical divergence: {0}")]
    CriticalDivergence(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("basis mismatch: expected {expected}, found {found}")]
    BasisMismatch { expected: String, found: String },
    #[error("system too large: {0}")]
    TooLarge(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("not converged after t = {t_reached:e}, residual {residual:e}")]
    NotConverged { t_reached: f64, residual: f64 },
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("malformed state file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("state ({x0}, {x1}) is outside the state space (f_n = {f_n})")]
    StateOutOfRange { x0: u64, x1: u64, f_n: u64 },

    #[error("no transition available from the absorbing state")]
    Absorbing,

    #[error("time {t} is outside the simulated range [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("time {t} is not a recorded grid time")]
    NotOnGrid { t: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Picard iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("root not resolved: residual {residual:e} exceeds tolerance {tol:e}")]
    RootNotResolved { residual: f64, tol: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}

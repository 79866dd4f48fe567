use thiserror::Error;

use crate::coeffs::ParseError;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("time {t} is outside the window [{lo}, {hi}]")]
    OutsideWindow { t: f64, lo: f64, hi: f64 },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("evaluation failed{context}: {message}")]
    Eval { message: String, context: String },

    #[error("I + C_{k} is numerically singular (smallest singular value {sigma_min:e})")]
    SingularImpulse { k: i64, sigma_min: f64 },

    #[error("{what}({t}, {tau}) is numerically singular (condition number {cond:e})")]
    Singular {
        what: &'static str,
        t: f64,
        tau: f64,
        cond: f64,
    },

    #[error("non-finite values while integrating {what} on [{from}, {to}]")]
    NonFinite {
        what: &'static str,
        from: f64,
        to: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),

    #[error("Picard iteration did not converge on interval {interval} after {iterations} iterations (last change {change:e})")]
    NotConverged {
        interval: usize,
        iterations: usize,
        change: f64,
    },

    #[error("jump identity violated at t = {t} (residual {residual:e})")]
    JumpMismatch { t: f64, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn eval(message: impl Into<String>) -> Self {
        Error::Eval {
            message: message.into(),
            context: String::new(),
        }
    }

    pub(crate) fn with_context(self, context: impl FnOnce() -> String) -> Self {
        match self {
            Error::Eval { message, context: c } if c.is_empty() => Error::Eval {
                message,
                context: context(),
            },
            other => other,
        }
    }
}

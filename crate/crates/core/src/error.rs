use thiserror::Error;

/// Errors raised by the simulator and optimizers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} = {value} is outside the supported range [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("numerical instability at step {step} (t = {t_us} us)")]
    NumericalInstability { step: usize, t_us: f64 },

    #[error(
        "optimization stalled at iteration {iteration}: retrieved energy fraction {retrieved_fraction:e} is below the floor"
    )]
    Stalled {
        iteration: usize,
        retrieved_fraction: f64,
    },

    #[error("power iteration did not converge after {cycles} cycles (last eigenvalue ratio {last_ratio})")]
    NotConverged { cycles: usize, last_ratio: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("malformed CSV: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

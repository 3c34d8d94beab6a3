use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    /// The fully sampled calibration block alone exceeds the sample budget.
    #[error(
        "infeasible undersampling mask: central block holds {central} points but the budget \
         for R={r_accel} is {budget}; largest feasible acceleration is R={max_feasible_r}"
    )]
    InfeasibleMask {
        r_accel: u32,
        central: usize,
        budget: usize,
        max_feasible_r: u32,
    },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

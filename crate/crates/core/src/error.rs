use thiserror::Error;

use crate::abd::SystemBlock;

/// Errors raised anywhere in the collocation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("x = {x} lies outside the interval [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    /// Site `index` (zero-based) does not satisfy `t_i < tau_i < t_{i+k}`.
    #[error("Schoenberg-Whitney condition violated at site {index}")]
    SchoenbergWhitney { index: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("singular {block} block in the collocation matrix")]
    SingularBlock { block: SystemBlock },

    #[error("Newton iteration diverged at iteration {iteration} (right-end value {value})")]
    Divergence { iteration: usize, value: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

use std::io;

use thiserror::Error;

/// Errors raised by model construction and the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state space would hold {states} states, above the cap of {cap}")]
    Capacity { states: u128, cap: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("negative rate {value} at {location}")]
    NegativeRate { location: String, value: f64 },

    #[error("boundary violation: {0}")]
    Boundary(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("function must be strictly positive; entry {index} is {value}")]
    NonPositive { index: usize, value: f64 },

    #[error("function must be nonnegative; entry {index} is {value}")]
    Negative { index: usize, value: f64 },

    #[error("operation requires a {expected} model, got {got}")]
    WrongFamily { expected: &'static str, got: &'static str },

    #[error("log-concavity fails at n = {index}: {lhs} < {rhs}")]
    LogConcavity { index: usize, lhs: f64, rhs: f64 },

    #[error("rates of site {site} decrease at n = {n}")]
    Monotonicity { site: usize, n: usize },

    #[error("generator is not reversible: symmetrization residual {residual:e}")]
    NotReversible { residual: f64 },

    #[error("state space too large for this operation: {states} states (max {max})")]
    SpaceTooLarge { states: usize, max: usize },

    #[error("{0}")]
    Domain(String),

    #[error("fitting window too short: {0} usable points")]
    WindowTooShort(usize),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

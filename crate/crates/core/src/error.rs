//! Crate-wide error type.

use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("absolute continuity violated: {0}")]
    AbsoluteContinuity(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("invalid distribution: {0}")]
    InvalidDist(String),
    #[error("channel is not {alpha}-DP (level {level})")]
    NotDp { alpha: f64, level: f64 },
    #[error("empty model class")]
    EmptyClass,
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("ill-formed structure: {0}")]
    Structure(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub type Result<T> = std::result::Result<T, Error>;

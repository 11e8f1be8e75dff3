use thiserror::Error;

/// Errors raised by the construction and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("generator is not skew-symmetric: max |J + J^T| = {max_asymmetry:e}")]
    NotSkewSymmetric { max_asymmetry: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("input undefined at t = {t}")]
    InputUndefined { t: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("covariance is not symmetric positive semidefinite: {0}")]
    InvalidCovariance(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("certification failed: {inequality} ({lhs:e} > {rhs:e})")]
    CertificationFailed { inequality: String, lhs: f64, rhs: f64 },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

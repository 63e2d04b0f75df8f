//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input matrix failed the Hermiticity check at construction.
    #[error("matrix not Hermitian: max asymmetry {asymmetry:.3e} exceeds {tol:.3e} (relative)")]
    NotHermitian { asymmetry: f64, tol: f64 },

    /// Operator or state dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Matrix failed a density-matrix invariant (trace, positivity).
    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    /// Logarithm of a rank-deficient operator under the `reject` policy.
    #[error("singular logarithm: eigenvalue {eigenvalue:.3e} at or below support tolerance {support_tol:.3e}")]
    SingularLogarithm { eigenvalue: f64, support_tol: f64 },

    /// Fixed-step integration lost positivity or violated a guard.
    #[error("integrator failure at t = {time}: {reason}")]
    IntegratorFailure { time: f64, reason: String },

    /// Two independent evaluation routes disagreed beyond tolerance.
    #[error("internal consistency check failed: {0}")]
    Inconsistency(String),

    /// A scalar argument violated its documented constraint.
    #[error("invalid parameter `{name}`: must satisfy {constraint}, got {value}")]
    InvalidParameter {
        name: String,
        constraint: String,
        value: String,
    },

    /// Unknown named model requested.
    #[error("unknown model `{name}`; valid names: {valid}")]
    UnknownModel { name: String, valid: String },

    /// Scenario document failed to parse or validate.
    #[error("scenario config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &str, constraint: &str, value: impl std::fmt::Display) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            constraint: constraint.to_string(),
            value: value.to_string(),
        }
    }
}

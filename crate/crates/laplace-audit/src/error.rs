//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model construction, mode finding, certification and
/// bound evaluation.
#[derive(Debug, Error)]
pub enum AuditError {
    /// Invalid input (bad hyperparameters, malformed data, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The mode search failed to converge or diverged.
    #[error("mode search failed: {0}")]
    ModeSearch(String),

    /// A matrix that must be symmetric positive definite is not.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A required assumption does not hold.
    #[error("assumption {name} violated: {detail}")]
    Assumption { name: String, detail: String },

    /// No radius satisfies the feasibility inequalities at this sample size.
    #[error("infeasible certificate: {0}")]
    Infeasible(String),

    /// A requested oracle or analytic formula is not available for this model.
    #[error("unavailable: {0}")]
    Unavailable(String),

    /// Numerical failure (non-converging quadrature, overflow, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, AuditError>;

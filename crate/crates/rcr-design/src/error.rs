//! Crate-wide error type for numeric and domain failures.

use thiserror::Error;

/// Errors raised by construction, evaluation, and solving.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,

    #[error("matrix is not positive definite (pivot {pivot:.3e} below threshold)")]
    NotPositiveDefinite { pivot: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPositiveSemidefinite { min_eig: f64 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("non-finite entry encountered")]
    NonFinite,

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("counts sum to {got}, expected {expected}")]
    CountMismatch { expected: usize, got: usize },

    #[error("coefficient vector must be nonzero")]
    ZeroVector,

    #[error("weighting measure must have nonnegative entries summing to 1")]
    MeasureNotNormalized,

    #[error("infeasible: singular moment matrix (group {group})")]
    Infeasible { group: usize },

    #[error("no feasible starting design found after {attempts} attempts")]
    NoFeasibleStart { attempts: usize },

    #[error("design matrix is rank deficient (group {group})")]
    RankDeficient { group: usize },

    #[error("groups are not identical: {0}")]
    GroupsNotIdentical(String),

    #[error("argument {name}={value} outside domain {domain}")]
    DomainError {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

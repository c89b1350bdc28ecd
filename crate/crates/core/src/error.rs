use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A physical or numerical input lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The caller violated a structural precondition (grid shape, sequence order, ...).
    #[error("usage error: {0}")]
    Usage(String),
    /// An ODE trajectory left its basin of attraction.
    #[error("divergence: {0}")]
    Divergence(String),
    /// A closed-form denominator or lattice pivot collapsed to zero.
    #[error("singular configuration: {0}")]
    Singular(String),
    /// A numeric quadrature did not settle.
    #[error("non-convergence: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

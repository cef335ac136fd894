//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by geometry, channel, and optimization routines.
#[derive(Debug, Error)]
pub enum IcalError {
    /// Terminal coincides with the satellite or the AoD is undefined (0/0).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// A physical formula was evaluated outside its valid domain.
    #[error("domain error: {0}")]
    DomainError(String),

    /// A quadratic form that must be real carried a large imaginary residual.
    #[error("quadratic form not real: imaginary residual {0:.3e} (relative)")]
    NonRealQuadraticForm(f64),

    /// The analog precoder Gram matrix is singular in the baseband update.
    #[error("singular Gram matrix in baseband update")]
    SingularGram,

    /// The water-level bisection could not bracket a root.
    #[error("bisection failure: {0}")]
    BisectionFailure(String),

    /// The SDP solver failed to produce a usable iterate.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// A convergence-trace file referenced by the CLI does not exist.
    #[error("missing trace: {0}")]
    MissingTrace(String),

    /// Invalid configuration file or inconsistent parameter set.
    #[error("config error: {0}")]
    Config(String),
}

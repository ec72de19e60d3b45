//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A function and a norm (or two functions) live on different spaces.
    #[error("dimension mismatch: expected {expected} atoms, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Invalid space construction (non-positive weight, mass not 1, ...).
    #[error("invalid probability space: {0}")]
    InvalidSpace(String),

    /// Invalid norm parameters (p < 1, non-decreasing Lorentz weights, ...).
    #[error("invalid norm: {0}")]
    InvalidNorm(String),

    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative solver hit its iteration cap; `best` is the best value
    /// (a valid lower bound for maximization problems) reached so far.
    #[error("solver did not converge after {iterations} iterations (best value {best})")]
    SolverFailure { iterations: usize, best: f64 },

    /// The norm is not differentiable at the requested point; the one-sided
    /// difference quotients at `atom` are reported.
    #[error("norm not smooth at atom {atom}: one-sided slopes {left} vs {right}")]
    NonSmooth { atom: usize, left: f64, right: f64 },

    /// Every sampled configuration was degenerate (e.g. all-zero tuples).
    #[error("degenerate sampling: {0}")]
    DegenerateSampling(String),

    /// The space is too large for an exhaustive construction.
    #[error("space too large: {n} atoms exceeds the limit of {max}")]
    TooLarge { n: usize, max: usize },

    /// Configuration parsing or resolution failure.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

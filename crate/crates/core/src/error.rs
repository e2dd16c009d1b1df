//! Error type shared across the crate.

use thiserror::Error;

/// Anything that can go wrong while building plans, evaluating the model,
/// fitting, sampling, or doing I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A stress plan failed validation (ordering, positivity, counts).
    #[error("invalid stress plan: {0}")]
    Plan(String),

    /// A parameter vector is outside the admissible region.
    #[error("invalid parameters: {0}")]
    Theta(String),

    /// An input value is outside the domain of the requested quantity.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative routine ran out of iterations without meeting its
    /// tolerance.
    #[error("failed to converge: {0}")]
    NonConvergence(String),

    /// Reading or writing a file failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A file or string could not be parsed into the expected shape.
    #[error("parse error: {0}")]
    Parse(String),

    /// A requested option or combination is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

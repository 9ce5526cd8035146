//! Crate-wide error type.
//!
//! Library functions return [`Result`] for recoverable failures; documented
//! caller preconditions that are cheap to check are validated eagerly and
//! reported as [`Error::Precondition`] rather than silently propagating NaNs.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the library; the CLI maps these onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// A documented precondition was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Mismatched vector dimensions.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A computation produced a non-finite value where a finite one is required.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Training left the finite regime and was aborted.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// Invalid configuration file, field value, or override.
    #[error("config error: {0}")]
    Config(String),

    /// An environment violated its contract (e.g. an episode that never ends
    /// under an undiscounted objective).
    #[error("environment contract violation: {0}")]
    Environment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

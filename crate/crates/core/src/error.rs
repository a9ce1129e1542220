//! Error taxonomy shared by the whole crate.
//!
//! The four variants map onto the CLI exit-code contract: `Usage` is a caller
//! mistake (exit 2), `Domain` is a mathematically invalid argument (exit 2),
//! `Integration` and `Degenerate` are runtime numeric failures (exit 3).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid call (mismatched grids, inconsistent parameters).
    #[error("usage error: {0}")]
    Usage(String),

    /// Time integration produced a non-finite state.
    #[error("integration failure at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    /// A sampling procedure reached a state it cannot make progress from.
    #[error("degenerate ensemble: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

pub(crate) fn domain(msg: impl Into<String>) -> ModelError {
    ModelError::Domain(msg.into())
}

pub(crate) fn usage(msg: impl Into<String>) -> ModelError {
    ModelError::Usage(msg.into())
}

use thiserror::Error;

/// Phase selector used in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Phase {
    /// Right (seller) phase, `u1`.
    Plus,
    /// Left (buyer) phase, `u2`, stored on the reflected coordinate.
    Minus,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::Plus => write!(f, "u1"),
            Phase::Minus => write!(f, "u2"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite {what} in phase {phase} at node {node}")]
    InvalidState {
        what: &'static str,
        phase: Phase,
        node: usize,
    },

    #[error("non-finite front quantity: {0}")]
    InvalidFront(&'static str),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("profile leaves the window: {0}")]
    OutOfWindow(String),

    #[error("no root of the similarity equation in [{lo}, {hi}] (Stefan number {stefan_number})")]
    RootNotFound { lo: f64, hi: f64, stefan_number: f64 },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("expression error at offset {offset}: {message}")]
    Expression { offset: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

use thiserror::Error;

/// Errors surfaced by every fallible operation in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the operation's domain (bad dimension, bad
    /// probability vector, out-of-range action, support violation, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The call is illegal in the object's current state, e.g. stepping an
    /// environment whose episode already ended.
    #[error("state error: {0}")]
    State(String),

    /// A non-finite value appeared where a finite one is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A linear system was too ill-conditioned to give a trustworthy answer.
    #[error("degenerate system: {0}")]
    Degenerate(String),

    /// Training aborted because parameters left the finite / bounded region.
    #[error("divergence at episode {episode}, step {step}: {reason}")]
    Divergence {
        episode: usize,
        step: usize,
        reason: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(value: f64, what: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} is not finite ({value})")))
    }
}

use thiserror::Error;

/// Errors raised by oracles, solvers and the problem loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid scaling: {0}")]
    Scaling(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid MPC specification: {0}")]
    Spec(String),
    #[error("stepsize underflow: gamma = {0:e}")]
    GammaUnderflow(f64),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}

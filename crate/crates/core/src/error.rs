use thiserror::Error;

/// Errors raised by the solvers, oracles and verifiers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// An iterative routine ran out of iterations without reaching a verdict.
    #[error("budget exhausted after {iterations} iterations: {detail}")]
    Budget { iterations: usize, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The pessimization oracle produced a point outside the uncertainty set.
    #[error("pessimization output for constraint {constraint} has norm {norm} outside the uncertainty set")]
    InvalidPessimization { constraint: usize, norm: f64 },

    #[error("bracket failure: {0}")]
    Bracket(String),

    /// An oracle returned a verdict that breaks its own contract.
    #[error("oracle contract violated: {0}")]
    OracleContract(String),

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

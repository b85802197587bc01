use alloc::string::String;

/// Errors raised by the sampling core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("state outside the target's domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unstable discretisation: {0}")]
    Unstable(String),

    #[error("need at least {needed} chains, got {got}")]
    InsufficientChains { needed: usize, got: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("chain {chain} aborted at step {step}: {reason}")]
    ChainAborted {
        chain: usize,
        step: usize,
        reason: String,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input document (edge list, model config, ...).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structurally invalid graph input.
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// A parameter outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// An enumeration or matrix size cap was exceeded.
    #[error("cap exceeded: {0}")]
    CapExceeded(String),

    /// Infeasible configuration, pinning, or empty support.
    #[error("infeasible input: {0}")]
    Infeasible(String),

    /// A rejection-sampling generator ran out of retries.
    #[error("retry budget exhausted after {attempts} attempts: {context}")]
    RetryBudget { attempts: usize, context: String },

    /// A numerical contract was violated (reversibility, realness, ...).
    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

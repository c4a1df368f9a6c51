//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or state dimensions do not match what an operation expects.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input matrix is rank-deficient where full column rank is required.
    #[error("singular input: {0}")]
    Singular(String),

    /// A solution collapsed below the rank needed for rounding.
    #[error("degenerate solution: {0}")]
    Degenerate(String),

    /// Malformed record in a g2o stream.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structurally invalid input (mixed dimensions, duplicate edges, ...).
    #[error("format error: {0}")]
    Format(String),

    /// The pose graph is not weakly connected.
    #[error("graph is not weakly connected: {0}")]
    Disconnected(String),

    /// No balanced partition exists for the requested parameters.
    #[error("infeasible partition: {0}")]
    Infeasible(String),

    /// Invalid scalar parameter (non-real root, bad tolerance, ...).
    #[error("parameter error: {0}")]
    Param(String),

    /// A block minimization inside the solver failed.
    #[error("solver step failed: {0}")]
    Step(String),

    /// Message sent outside the cut-edge structure in the simulator.
    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}

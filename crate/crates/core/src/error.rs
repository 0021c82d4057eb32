//! Error type shared across the solver library.

use std::ops::Range;

/// Errors produced by tensor, hierarchical-matrix and solver operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("matrix is not symmetric: {context}")]
    NotSymmetric { context: String },

    #[error("matrix block {block:?} is not positive definite (shift {shift})")]
    NotPositiveDefinite { block: Range<usize>, shift: f64 },

    #[error("singular Kronecker-sum operator: eigenvalue sum {value} is not positive")]
    SingularOperator { value: f64 },

    #[error("degenerate interval pair: {context}")]
    DegenerateIntervals { context: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("eigensolver failed to converge after {iters} iterations")]
    EigNoConvergence { iters: usize },

    #[error("recursion depth {depth} exceeds guard")]
    RecursionDepth { depth: usize },

    #[error("solver failure at fADI step {step}: {source}")]
    SolverStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::DimMismatch {
            context: context.into(),
            expected: expected.into(),
            got: got.into(),
        }
    }

    /// Attach the fADI/RK step index at which an inner solve failed.
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::SolverStep {
            step,
            source: Box::new(self),
        }
    }
}

use thiserror::Error;

/// Errors shared across the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input is numerically or structurally degenerate for the requested
    /// operation (rank-deficient projection, collinear correspondences, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The working set fell below the solver's minimum measurement count.
    #[error("insufficient inliers at iteration {iteration}: {available} available, {required} required")]
    InsufficientInliers {
        iteration: usize,
        available: usize,
        required: usize,
    },

    /// A non-minimal solve failed inside an estimator loop.
    #[error("solver failure at iteration {iteration}: {source}")]
    SolverFailure {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

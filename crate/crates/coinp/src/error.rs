//! Crate-wide error type.

/// Errors produced by dataset handling, learners, tests, and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an operation's inputs was violated.
    #[error("{0}")]
    InvalidInput(String),

    /// CSV ingestion failed at a specific cell. `row` is the 1-based data
    /// row (the header is row 0).
    #[error("csv error at row {row}, column `{column}`: {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },

    /// A learner could not produce a predictor. `context` identifies which
    /// fit failed (e.g. the observed fit or a numbered permutation refit).
    #[error("learner fit failed ({context}): {message}")]
    Fit { context: String, message: String },

    /// Network training diverged or was configured so no epoch could run.
    #[error("mlp training failed: {0}")]
    Training(String),

    /// A records file did not match the expected schema. `line` is 1-based
    /// counting the header as line 1.
    #[error("records file line {line}: {message}")]
    Records { line: usize, message: String },

    /// Too many replications of one grid cell failed.
    #[error("cell {cell}: {failed} of {total} replications failed")]
    CellFailures {
        cell: String,
        failed: usize,
        total: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A non-finite value (NaN or infinity) was found at the input boundary.
    #[error("non-finite value in {what} at token index {index}")]
    NonFinite { what: &'static str, index: usize },

    /// Two inputs that must agree on a dimension do not.
    #[error("shape mismatch: {what} ({left} vs {right})")]
    ShapeMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    /// A parameter violates a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Duplicate IDs in an input that requires uniqueness.
    #[error("duplicate ids: {0:?}")]
    DuplicateIds(Vec<String>),

    /// Paired analysis requires both arms to cover the same problems.
    #[error("problems present in only one arm: {0:?}")]
    UnpairedProblems(Vec<String>),

    /// An input collection was empty where at least one element is required.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A serialized input does not match the expected schema.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable kind, used in CLI error records and exit codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "non_finite",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::InvalidParam(_) => "invalid_param",
            Error::DuplicateIds(_) => "duplicate_ids",
            Error::UnpairedProblems(_) => "unpaired_problems",
            Error::EmptyInput(_) => "empty_input",
            Error::Schema(_) => "schema",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

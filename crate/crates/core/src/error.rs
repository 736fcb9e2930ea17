use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("non-finite kernel value at quadrature node {index} (lambda = {lambda:e})")]
    NonFiniteKernel { index: usize, lambda: f64 },

    #[error("non-finite intermediate in layer {layer} at lambda = {lambda:e}")]
    NonFiniteLayer { layer: usize, lambda: f64 },

    #[error("vanishing denominator in the reflection factor at lambda = {lambda:e}")]
    SingularReflection { lambda: f64 },

    #[error("truncation index {index} outside {min}..={max}")]
    IndexOutOfRange { index: usize, min: usize, max: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("no truncation index produced a usable solution")]
    AllRunsFailed,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by malformed or inconsistent user input, as
    /// opposed to numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Shape(_)
                | Error::Parse(_)
                | Error::IndexOutOfRange { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

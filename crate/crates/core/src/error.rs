use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid bin size {0}: alpha must be a positive even integer")]
    InvalidAlpha(i64),

    #[error("class index {index} out of range for a grid of {classes} classes")]
    ClassOutOfRange { index: u32, classes: u32 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("buffer length {actual} does not match {expected} expected from the image dimensions")]
    BufferLength { expected: usize, actual: usize },

    #[error("grid mismatch: expected alpha={expected}, got alpha={actual}")]
    GridMismatch { expected: u32, actual: u32 },

    #[error("no class reaches the minimum count of {0}")]
    EmptyApprovedSet(u64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

use alloc::string::String;
use thiserror::Error;

/// Errors produced by the numeric core.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    /// Operand shapes are incompatible with an op's signature. Names the op
    /// and the offending dimensions.
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    /// A parameter is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input data cannot be processed (too short, empty, wrong layout).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A named feature tap does not exist on this pipeline.
    #[error("unknown tap `{0}`")]
    UnknownTap(String),

    /// `backward` was called on a non-scalar output.
    #[error("backward requires a scalar output, got shape {0}")]
    NonScalarOutput(String),
}

pub type Result<T> = core::result::Result<T, CoreError>;

pub(crate) fn shape_err(op: &'static str, detail: String) -> CoreError {
    CoreError::ShapeMismatch { op, detail }
}

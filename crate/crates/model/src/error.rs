use std::fmt;

use sled_tensor::TensorError;

#[derive(Debug)]
pub enum ModelError {
    /// Input extents violate a divisibility or equality requirement.
    Shape(String),
    /// Configuration or hyperparameter out of range.
    Parameter(String),
    /// Checkpoint written for a different configuration or layout.
    Compatibility(String),
    /// Malformed checkpoint bytes.
    Format(String),
    Tensor(TensorError),
    Io(std::io::Error),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Shape(m) => write!(f, "shape error: {m}"),
            ModelError::Parameter(m) => write!(f, "parameter error: {m}"),
            ModelError::Compatibility(m) => write!(f, "incompatible checkpoint: {m}"),
            ModelError::Format(m) => write!(f, "malformed checkpoint: {m}"),
            ModelError::Tensor(e) => write!(f, "{e}"),
            ModelError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for ModelError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ModelError::Tensor(e) => Some(e),
            ModelError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<TensorError> for ModelError {
    fn from(e: TensorError) -> Self {
        ModelError::Tensor(e)
    }
}

impl From<std::io::Error> for ModelError {
    fn from(e: std::io::Error) -> Self {
        ModelError::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;

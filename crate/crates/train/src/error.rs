use std::fmt;

use sled_data::DataError;
use sled_model::ModelError;
use sled_tensor::TensorError;

#[derive(Debug)]
pub enum TrainError {
    /// Invalid training configuration.
    Config(String),
    /// A metric or loss was asked to reduce over an empty set.
    Evaluation(String),
    /// The loss became non-finite during `epoch` (0-based).
    Diverged { epoch: usize, loss: f64 },
    Model(ModelError),
    Data(DataError),
    Tensor(TensorError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Config(m) => write!(f, "training config error: {m}"),
            TrainError::Evaluation(m) => write!(f, "evaluation error: {m}"),
            TrainError::Diverged { epoch, loss } => write!(f, "training diverged at epoch {epoch} (loss {loss})"),
            TrainError::Model(e) => write!(f, "{e}"),
            TrainError::Data(e) => write!(f, "{e}"),
            TrainError::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for TrainError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            TrainError::Model(e) => Some(e),
            TrainError::Data(e) => Some(e),
            TrainError::Tensor(e) => Some(e),
            _ => None,
        }
    }
}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Tensor(t) => TrainError::Tensor(t),
            other => TrainError::Model(other),
        }
    }
}

impl From<DataError> for TrainError {
    fn from(e: DataError) -> Self {
        TrainError::Data(e)
    }
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Tensor(e)
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;

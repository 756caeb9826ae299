use std::fmt;

use sled_data::DataError;
use sled_model::ModelError;
use sled_tensor::TensorError;
use sled_train::TrainError;

/// Command failure, classified by the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or inconsistent configuration, including a checkpoint built
    /// for a different model configuration.
    Config(String),
    /// Unreadable, malformed or missing input data, or unwritable output.
    Data(String),
    /// A gradient check failed or training diverged.
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Parameter(_) | ModelError::Compatibility(_) => CliError::Config(e.to_string()),
            ModelError::Shape(_) | ModelError::Format(_) | ModelError::Io(_) => CliError::Data(e.to_string()),
            ModelError::Tensor(t) => t.into(),
        }
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::NonFinite { .. } => CliError::Verification(e.to_string()),
            TensorError::Dimension { .. } => CliError::Data(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Config(e.to_string()),
            TrainError::Evaluation(_) => CliError::Data(e.to_string()),
            TrainError::Diverged { .. } => CliError::Verification(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Data(d) => d.into(),
            TrainError::Tensor(t) => t.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Wraps an output-side I/O failure with the path involved.
pub fn write_err(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

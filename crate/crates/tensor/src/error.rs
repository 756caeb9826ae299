use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorError {
    /// Extents disagree; `axis` names the offending axis when there is one.
    Dimension { op: &'static str, axis: Option<usize>, msg: String },
    /// A scalar hyperparameter (eps, stride, scale, ...) is out of range.
    Parameter { op: &'static str, msg: String },
    /// An op produced NaN or infinity from its inputs.
    NonFinite { op: &'static str },
    /// Input values are unusable for the op (empty mask, non-binary mask, ...).
    Evaluation { op: &'static str, msg: String },
    /// API misuse, such as calling backward on a non-scalar.
    Usage(String),
}

impl TensorError {
    pub(crate) fn dim(op: &'static str, axis: Option<usize>, msg: impl Into<String>) -> Self {
        TensorError::Dimension { op, axis, msg: msg.into() }
    }

    pub(crate) fn param(op: &'static str, msg: impl Into<String>) -> Self {
        TensorError::Parameter { op, msg: msg.into() }
    }

    pub(crate) fn eval(op: &'static str, msg: impl Into<String>) -> Self {
        TensorError::Evaluation { op, msg: msg.into() }
    }
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::Dimension { op, axis: Some(a), msg } => {
                write!(f, "{op}: dimension error on axis {a}: {msg}")
            }
            TensorError::Dimension { op, axis: None, msg } => write!(f, "{op}: dimension error: {msg}"),
            TensorError::Parameter { op, msg } => write!(f, "{op}: invalid parameter: {msg}"),
            TensorError::NonFinite { op } => write!(f, "{op}: produced a non-finite value"),
            TensorError::Evaluation { op, msg } => write!(f, "{op}: {msg}"),
            TensorError::Usage(msg) => write!(f, "usage error: {msg}"),
        }
    }
}

impl std::error::Error for TensorError {}

pub type Result<T> = std::result::Result<T, TensorError>;

//! Stereo disparity network: a reduced Siamese 2-D backbone, a
//! concatenation cost volume, interchangeable 3-D cost regularizers
//! (single long encoder-decoder, stacked hourglasses, plain cascade) and a
//! soft-argmin readout, plus a binary checkpoint format.

pub mod backbone;
pub mod checkpoint;
pub mod config;
pub mod cost_volume;
pub mod disparity;
pub mod error;
pub mod layers;
pub mod model;
pub mod params;
pub mod regularizer;
pub mod verify;

pub use config::{ModelConfig, Regularizer};
pub use cost_volume::build_cost_volume;
pub use disparity::{regress_disparity, soft_argmin};
pub use error::{ModelError, Result};
pub use layers::{Mode, NormUpdate};
pub use model::{count_parameters, Forward, ModelOutputs, StereoModel};
pub use params::{Builder, ParamId, ParamStore};

//! Dense `f64` tensors with a tape-based reverse-mode autodiff engine and
//! the handful of ops a 3-D cost-volume stereo network needs: 2-D/3-D
//! convolution, average pooling, trilinear upsampling, batch normalisation,
//! softmax and a masked smooth-L1 loss.

pub mod error;
pub mod gradcheck;
pub mod ops;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use error::{Result, TensorError};
pub use ops::conv::{conv_out_extent, ConvSpec};
pub use ops::loss::smooth_l1_value;
pub use ops::norm::{BatchStats, NormMode, BN_EPS, BN_MOMENTUM};
pub use ops::upsample::corner_aligned_taps;
pub use rng::XorShift64;
pub use tape::{BackwardCtx, Function, NodeInfo, Tape, Var};
pub use tensor::Tensor;

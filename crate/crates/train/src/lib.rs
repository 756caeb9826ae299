//! Training and evaluation: multi-output smooth-L1 loss, Adam with a
//! piecewise-constant learning-rate schedule, and the EPE / >t px / D1
//! metric suite.

pub mod config;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod trainer;

pub use config::{Phase, TrainConfig};
pub use error::{Result, TrainError};
pub use loss::total_loss;
pub use metrics::{
    d1_metric, end_point_error, is_d1_outlier, threshold_error, valid_mask, MetricReport, Region, SampleTally, Tally, D1,
};
pub use optim::Adam;
pub use trainer::{dataset_epe, evaluate, train, EpochRecord, Evaluation, Prepared, TrainLog};

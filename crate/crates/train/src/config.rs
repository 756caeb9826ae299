use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Constant `lr_initial` for `pretrain_epochs`.
    Pretrain,
    /// Piecewise-constant `finetune_lr_schedule`.
    Finetune,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub phase: Phase,
    pub lr_initial: f64,
    pub pretrain_epochs: usize,
    /// `(learning rate, epochs)` segments, applied in order.
    pub finetune_lr_schedule: Vec<(f64, usize)>,
    /// One weight per supervised output; `None` means all ones.
    pub loss_weights: Option<Vec<f64>>,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            phase: Phase::Pretrain,
            lr_initial: 0.001,
            pretrain_epochs: 20,
            finetune_lr_schedule: vec![(0.001, 600), (0.0001, 400)],
            loss_weights: None,
            batch_size: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, num_outputs: usize) -> Result<()> {
        let err = |m: String| Err(TrainError::Config(m));
        if self.batch_size == 0 {
            return err("batch_size must be > 0".into());
        }
        match self.phase {
            Phase::Pretrain => {
                if !(self.lr_initial >= 0.0 && self.lr_initial.is_finite()) {
                    return err(format!("lr_initial must be finite and >= 0, got {}", self.lr_initial));
                }
                if self.pretrain_epochs == 0 {
                    return err("pretrain_epochs must be > 0".into());
                }
            }
            Phase::Finetune => {
                if self.finetune_lr_schedule.is_empty() {
                    return err("finetune_lr_schedule is empty".into());
                }
                for &(lr, epochs) in &self.finetune_lr_schedule {
                    if !(lr > 0.0 && lr.is_finite()) || epochs == 0 {
                        return err(format!("schedule segment ({lr}, {epochs}) needs lr > 0 and epochs > 0"));
                    }
                }
            }
        }
        let weights = self.weights(num_outputs);
        if weights.len() != num_outputs {
            return err(format!("{} loss weights for {num_outputs} supervised outputs", weights.len()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return err(format!("loss weights must be finite and >= 0, got {weights:?}"));
        }
        Ok(())
    }

    pub fn weights(&self, num_outputs: usize) -> Vec<f64> {
        self.loss_weights.clone().unwrap_or_else(|| vec![1.0; num_outputs])
    }

    pub fn total_epochs(&self) -> usize {
        match self.phase {
            Phase::Pretrain => self.pretrain_epochs,
            Phase::Finetune => self.finetune_lr_schedule.iter().map(|s| s.1).sum(),
        }
    }

    /// Learning rate for 0-based `epoch`; `None` past the end of training.
    pub fn lr_at(&self, epoch: usize) -> Option<f64> {
        match self.phase {
            Phase::Pretrain => (epoch < self.pretrain_epochs).then_some(self.lr_initial),
            Phase::Finetune => {
                let mut end = 0;
                for &(lr, n) in &self.finetune_lr_schedule {
                    end += n;
                    if epoch < end {
                        return Some(lr);
                    }
                }
                None
            }
        }
    }
}

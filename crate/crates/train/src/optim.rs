use sled_tensor::Tensor;

use crate::error::{Result, TrainError};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam without weight decay; moment buffers are allocated on first step.
#[derive(Clone, Debug, Default)]
pub struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    steps: u64,
}

impl Adam {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update with step size `lr`. `grads[i]` is `None` for
    /// parameters the loss does not reach; their moments still decay.
    pub fn step<'a>(&mut self, lr: f64, params: impl Iterator<Item = &'a mut Tensor>, grads: &[Option<&Tensor>]) -> Result<()> {
        let params: Vec<&mut Tensor> = params.collect();
        if params.len() != grads.len() {
            return Err(TrainError::Config(format!("{} parameters but {} gradients", params.len(), grads.len())));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            self.v = self.m.clone();
        }
        self.steps += 1;
        let t = self.steps as i32;
        let (c1, c2) = (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t));
        for (i, p) in params.into_iter().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let data = p.data_mut();
            for j in 0..data.len() {
                let g = grads[i].map_or(0.0, |g| g.data()[j]);
                m[j] = BETA1 * m[j] + (1.0 - BETA1) * g;
                v[j] = BETA2 * v[j] + (1.0 - BETA2) * g * g;
                data[j] -= lr * (m[j] / c1) / ((v[j] / c2).sqrt() + EPSILON);
            }
        }
        Ok(())
    }
}

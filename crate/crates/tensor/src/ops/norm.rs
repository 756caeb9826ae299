use crate::error::{Result, TensorError};
use crate::tape::{BackwardCtx, Function, Tape, Var};
use crate::tensor::Tensor;

/// Momentum of the running-statistics update.
pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
pub enum NormMode<'a> {
    /// Normalise with the batch statistics.
    Train,
    /// Normalise with stored running statistics.
    Eval { mean: &'a [f64], var: &'a [f64] },
}

/// Per-channel statistics of one training-mode batch: biased mean and the
/// unbiased variance used for running-stat updates.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var_unbiased: Vec<f64>,
}

impl BatchStats {
    /// Applies `running = (1 - m)·running + m·batch` in place.
    pub fn update_running(&self, mean: &mut [f64], var: &mut [f64]) {
        for c in 0..self.mean.len() {
            mean[c] = (1.0 - BN_MOMENTUM) * mean[c] + BN_MOMENTUM * self.mean[c];
            var[c] = (1.0 - BN_MOMENTUM) * var[c] + BN_MOMENTUM * self.var_unbiased[c];
        }
    }
}

struct BatchNorm {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    train: bool,
    channels: usize,
    inner: usize,
}

impl BatchNorm {
    fn channel_slices(&self, len: usize) -> impl Iterator<Item = (usize, std::ops::Range<usize>)> + '_ {
        let block = self.channels * self.inner;
        (0..len / block).flat_map(move |n| {
            (0..self.channels).map(move |c| {
                let start = n * block + c * self.inner;
                (c, start..start + self.inner)
            })
        })
    }
}

impl Function for BatchNorm {
    fn name(&self) -> &'static str {
        "batchnorm"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let g = ctx.grad.data();
        let gamma = ctx.inputs[1].data();
        let mut sum_g = vec![0.0; self.channels];
        let mut sum_gx = vec![0.0; self.channels];
        for (c, r) in self.channel_slices(g.len()) {
            for i in r {
                sum_g[c] += g[i];
                sum_gx[c] += g[i] * self.xhat[i];
            }
        }
        let dx = ctx.needs[0].then(|| {
            let mut dx = vec![0.0; g.len()];
            let m = (g.len() / self.channels) as f64;
            for (c, r) in self.channel_slices(g.len()) {
                let k = gamma[c] * self.inv_std[c];
                for i in r {
                    dx[i] = if self.train {
                        k * (g[i] - sum_g[c] / m - self.xhat[i] * sum_gx[c] / m)
                    } else {
                        k * g[i]
                    };
                }
            }
            Tensor::new(ctx.inputs[0].shape().to_vec(), dx).expect("shape")
        });
        Ok(vec![
            dx,
            ctx.needs[1].then(|| Tensor::new(vec![self.channels], sum_gx).expect("shape")),
            ctx.needs[2].then(|| Tensor::new(vec![self.channels], sum_g).expect("shape")),
        ])
    }
}

impl Tape {
    /// Per-channel normalisation over all axes except axis 1, followed by
    /// the affine `gamma·x̂ + beta`. In train mode the batch statistics are
    /// returned so the caller can update its running buffers.
    pub fn batchnorm(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        mode: NormMode<'_>,
        eps: f64,
    ) -> Result<(Var, Option<BatchStats>)> {
        const OP: &str = "batchnorm";
        if eps <= 0.0 || !eps.is_finite() {
            return Err(TensorError::param(OP, format!("eps must be > 0, got {eps}")));
        }
        let shape = self.shape(input).to_vec();
        if shape.len() < 2 {
            return Err(TensorError::dim(OP, None, "input needs a channel axis"));
        }
        let channels = shape[1];
        for (name, v) in [("gamma", gamma), ("beta", beta)] {
            if self.shape(v) != [channels] {
                return Err(TensorError::dim(
                    OP,
                    Some(1),
                    format!("{name} shape {:?} does not match {channels} channels", self.shape(v)),
                ));
            }
        }
        let inner: usize = shape[2..].iter().product();
        let count = shape[0] * inner;
        let x = self.value(input).data();
        let (mean, var, stats) = match mode {
            NormMode::Train => {
                let mut mean = vec![0.0; channels];
                let mut var = vec![0.0; channels];
                for n in 0..shape[0] {
                    for (c, m) in mean.iter_mut().enumerate() {
                        let s = (n * channels + c) * inner;
                        *m += x[s..s + inner].iter().sum::<f64>();
                    }
                }
                mean.iter_mut().for_each(|m| *m /= count as f64);
                for n in 0..shape[0] {
                    for c in 0..channels {
                        let s = (n * channels + c) * inner;
                        var[c] += x[s..s + inner].iter().map(|v| (v - mean[c]).powi(2)).sum::<f64>();
                    }
                }
                let unbiased = var
                    .iter()
                    .map(|v| if count > 1 { v / (count - 1) as f64 } else { 0.0 })
                    .collect();
                var.iter_mut().for_each(|v| *v /= count as f64);
                let stats = BatchStats { mean: mean.clone(), var_unbiased: unbiased };
                (mean, var, Some(stats))
            }
            NormMode::Eval { mean, var } => {
                if mean.len() != channels || var.len() != channels {
                    return Err(TensorError::dim(OP, Some(1), "running statistics length mismatch"));
                }
                (mean.to_vec(), var.to_vec(), None)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let func = BatchNorm { xhat: vec![0.0; x.len()], inv_std, train: stats.is_some(), channels, inner };
        let gamma_v = self.value(gamma).data();
        let beta_v = self.value(beta).data();
        let mut xhat = vec![0.0; x.len()];
        let mut out = vec![0.0; x.len()];
        for (c, r) in func.channel_slices(x.len()) {
            for i in r {
                xhat[i] = (x[i] - mean[c]) * func.inv_std[c];
                out[i] = gamma_v[c] * xhat[i] + beta_v[c];
            }
        }
        let func = BatchNorm { xhat, ..func };
        let out = Tensor::new(shape, out)?;
        let var = self.record(Box::new(func), vec![input, gamma, beta], out)?;
        Ok((var, stats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(tape: &mut Tape, c: usize, g: f64, b: f64) -> (Var, Var) {
        (tape.constant(Tensor::full(vec![c], g)), tape.constant(Tensor::full(vec![c], b)))
    }

    #[test]
    fn constant_input_maps_to_beta() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(vec![2, 3, 4, 4], 3.0));
        let (g, b) = affine(&mut tape, 3, 1.0, 5.0);
        let (y, _) = tape.batchnorm(x, g, b, NormMode::Train, BN_EPS).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn unit_two_level_signal_is_unchanged() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, 1, 4], vec![-1.0, 1.0, 1.0, -1.0]).unwrap());
        let (g, b) = affine(&mut tape, 1, 1.0, 0.0);
        let (y, _) = tape.batchnorm(x, g, b, NormMode::Train, 1e-14).unwrap();
        for (o, e) in tape.value(y).data().iter().zip([-1.0, 1.0, 1.0, -1.0]) {
            assert!((o - e).abs() < 1e-12);
        }
    }

    #[test]
    fn non_positive_eps_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(vec![1, 1, 2]));
        let (g, b) = affine(&mut tape, 1, 1.0, 0.0);
        assert!(matches!(
            tape.batchnorm(x, g, b, NormMode::Train, 0.0),
            Err(TensorError::Parameter { .. })
        ));
    }

    #[test]
    fn running_update_uses_momentum() {
        let stats = BatchStats { mean: vec![1.0], var_unbiased: vec![3.0] };
        let (mut m, mut v) = (vec![0.0], vec![1.0]);
        stats.update_running(&mut m, &mut v);
        assert!((m[0] - 0.1).abs() < 1e-15);
        assert!((v[0] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn eval_mode_uses_given_statistics() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, 1, 2], vec![3.0, 5.0]).unwrap());
        let (g, b) = affine(&mut tape, 1, 2.0, 1.0);
        let (y, stats) = tape
            .batchnorm(x, g, b, NormMode::Eval { mean: &[1.0], var: &[4.0 - 1e-5] }, 1e-5)
            .unwrap();
        assert!(stats.is_none());
        let out = tape.value(y).data();
        assert!((out[0] - 3.0).abs() < 1e-12 && (out[1] - 5.0).abs() < 1e-12);
    }
}

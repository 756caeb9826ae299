use crate::error::{Result, TensorError};
use crate::tape::{BackwardCtx, Function, Tape, Var};
use crate::tensor::Tensor;

/// Huber-style penalty with unit cutover: `0.5·x²` for `|x| < 1`, else `|x| − 0.5`.
pub fn smooth_l1_value(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

fn smooth_l1_slope(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

struct SmoothL1 {
    mask: Vec<bool>,
    valid: usize,
}

impl Function for SmoothL1 {
    fn name(&self) -> &'static str {
        "smooth_l1"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let g = ctx.grad.data()[0] / self.valid as f64;
        let (pred, target) = (ctx.inputs[0].data(), ctx.inputs[1].data());
        let dpred: Vec<f64> = pred
            .iter()
            .zip(target)
            .zip(&self.mask)
            .map(|((p, t), &m)| if m { g * smooth_l1_slope(p - t) } else { 0.0 })
            .collect();
        let dtarget = ctx.needs[1].then(|| dpred.iter().map(|d| -d).collect::<Vec<_>>());
        let shape = ctx.inputs[0].shape().to_vec();
        Ok(vec![
            Some(Tensor::new(shape.clone(), dpred)?),
            dtarget.map(|d| Tensor::new(shape, d)).transpose()?,
        ])
    }
}

impl Tape {
    /// Mean smooth-L1 penalty of `pred − target` over elements where the
    /// binary `mask` is 1.
    pub fn smooth_l1(&mut self, pred: Var, target: Var, mask: &Tensor) -> Result<Var> {
        const OP: &str = "smooth_l1";
        let (p, t) = (self.value(pred), self.value(target));
        if p.shape() != t.shape() || p.shape() != mask.shape() {
            return Err(TensorError::dim(
                OP,
                None,
                format!("pred {:?}, target {:?}, mask {:?}", p.shape(), t.shape(), mask.shape()),
            ));
        }
        if mask.data().iter().any(|&m| m != 0.0 && m != 1.0) {
            return Err(TensorError::eval(OP, "mask must be binary"));
        }
        let flags: Vec<bool> = mask.data().iter().map(|&m| m == 1.0).collect();
        let valid = flags.iter().filter(|&&m| m).count();
        if valid == 0 {
            return Err(TensorError::eval(OP, "mask selects no elements"));
        }
        let total: f64 = p
            .data()
            .iter()
            .zip(t.data())
            .zip(&flags)
            .filter(|(_, &m)| m)
            .map(|((a, b), _)| smooth_l1_value(a - b))
            .sum();
        let out = Tensor::scalar(total / valid as f64);
        self.record(Box::new(SmoothL1 { mask: flags, valid }), vec![pred, target], out)
    }
}

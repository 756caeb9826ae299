use crate::error::{Result, TensorError};
use crate::tape::{BackwardCtx, Function, Tape, Var};
use crate::tensor::Tensor;

/// `(outer, len, inner)` decomposition of a shape around one axis.
fn split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn check_axis(op: &'static str, shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(TensorError::dim(op, Some(axis), format!("axis out of range for rank {}", shape.len())));
    }
    Ok(())
}

struct Softmax {
    axis: usize,
}

impl Function for Softmax {
    fn name(&self) -> &'static str {
        "softmax"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let (outer, len, inner) = split(ctx.output.shape(), self.axis);
        let y = ctx.output.data();
        let g = ctx.grad.data();
        let mut dx = vec![0.0; y.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let dot: f64 = (0..len).map(|a| g[base + a * inner] * y[base + a * inner]).sum();
                for a in 0..len {
                    let j = base + a * inner;
                    dx[j] = y[j] * (g[j] - dot);
                }
            }
        }
        Ok(vec![Some(Tensor::new(ctx.output.shape().to_vec(), dx)?)])
    }
}

/// Contracts one axis against a fixed value vector.
struct Expectation {
    axis: usize,
    values: Vec<f64>,
}

impl Function for Expectation {
    fn name(&self) -> &'static str {
        "expectation"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let shape = ctx.inputs[0].shape();
        let (outer, len, inner) = split(shape, self.axis);
        let g = ctx.grad.data();
        let mut dp = vec![0.0; ctx.inputs[0].numel()];
        for o in 0..outer {
            for a in 0..len {
                for i in 0..inner {
                    dp[(o * len + a) * inner + i] = self.values[a] * g[o * inner + i];
                }
            }
        }
        Ok(vec![Some(Tensor::new(shape.to_vec(), dp)?)])
    }
}

impl Tape {
    /// Softmax along `axis`, computed with max subtraction.
    pub fn softmax(&mut self, input: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        check_axis("softmax", &shape, axis)?;
        let (outer, len, inner) = split(&shape, axis);
        let x = self.value(input).data();
        let mut y = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let max = (0..len).map(|a| x[base + a * inner]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for a in 0..len {
                    let e = (x[base + a * inner] - max).exp();
                    y[base + a * inner] = e;
                    total += e;
                }
                for a in 0..len {
                    y[base + a * inner] /= total;
                }
            }
        }
        let out = Tensor::new(shape, y)?;
        self.record(Box::new(Softmax { axis }), vec![input], out)
    }

    /// `out[.., ..] = Σ_a values[a] · p[.., a, ..]`; the contracted axis is removed.
    pub fn expectation(&mut self, input: Var, axis: usize, values: &[f64]) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        check_axis("expectation", &shape, axis)?;
        let (outer, len, inner) = split(&shape, axis);
        if values.len() != len {
            return Err(TensorError::dim(
                "expectation",
                Some(axis),
                format!("{} values for an axis of extent {len}", values.len()),
            ));
        }
        let p = self.value(input).data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for (a, &v) in values.iter().enumerate() {
                let src = &p[(o * len + a) * inner..(o * len + a + 1) * inner];
                for (dst, &pv) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *dst += v * pv;
                }
            }
        }
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        let out = Tensor::new(out_shape, out)?;
        self.record(Box::new(Expectation { axis, values: values.to_vec() }), vec![input], out)
    }
}

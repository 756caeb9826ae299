//! Trilinear upsampling with corner-aligned sampling: output index 0 maps
//! to input index 0 and the last output index maps to the last input index,
//! so any tri-affine field is reproduced exactly.

use crate::error::{Result, TensorError};
use crate::tape::{BackwardCtx, Function, Tape, Var};
use crate::tensor::Tensor;

/// Per-output-index interpolation taps `(lo, hi, weight_of_hi)` along one axis.
pub fn corner_aligned_taps(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    (0..output)
        .map(|i| {
            if input == 1 || output == 1 {
                return (0, 0, 0.0);
            }
            let pos = i as f64 * (input - 1) as f64 / (output - 1) as f64;
            let lo = (pos.floor() as usize).min(input - 2);
            (lo, lo + 1, pos - lo as f64)
        })
        .collect()
}

struct Trilinear {
    taps: [Vec<(usize, usize, f64)>; 3],
    input: [usize; 3],
    outer: usize,
}

impl Trilinear {
    /// Visits each (input index, output index, weight) triple.
    fn for_each(&self, mut f: impl FnMut(usize, usize, f64)) {
        let [id, ih, iw] = self.input;
        let (od, oh, ow) = (self.taps[0].len(), self.taps[1].len(), self.taps[2].len());
        let in_plane = id * ih * iw;
        let out_plane = od * oh * ow;
        for c in 0..self.outer {
            let ib = c * in_plane;
            let mut o = c * out_plane;
            for &(z0, z1, fz) in &self.taps[0] {
                for &(y0, y1, fy) in &self.taps[1] {
                    for &(x0, x1, fx) in &self.taps[2] {
                        for (z, wz) in [(z0, 1.0 - fz), (z1, fz)] {
                            for (y, wy) in [(y0, 1.0 - fy), (y1, fy)] {
                                let row = ib + (z * ih + y) * iw;
                                let wzy = wz * wy;
                                f(row + x0, o, wzy * (1.0 - fx));
                                f(row + x1, o, wzy * fx);
                            }
                        }
                        o += 1;
                    }
                }
            }
        }
    }
}

impl Function for Trilinear {
    fn name(&self) -> &'static str {
        "trilinear_upsample"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let g = ctx.grad.data();
        let mut dx = vec![0.0; ctx.inputs[0].numel()];
        self.for_each(|i, o, w| dx[i] += w * g[o]);
        Ok(vec![Some(Tensor::new(ctx.inputs[0].shape().to_vec(), dx)?)])
    }
}

impl Tape {
    /// Upsamples `[N,C,D,H,W]` by an integer factor on all three spatial axes.
    pub fn trilinear_upsample(&mut self, input: Var, scale: usize) -> Result<Var> {
        const OP: &str = "trilinear_upsample";
        if scale == 0 {
            return Err(TensorError::param(OP, "scale must be >= 1"));
        }
        let shape = self.shape(input).to_vec();
        if shape.len() != 5 {
            return Err(TensorError::dim(OP, None, format!("input must be rank 5, got {}", shape.len())));
        }
        let in_sp = [shape[2], shape[3], shape[4]];
        let func = Trilinear {
            taps: in_sp.map(|n| corner_aligned_taps(n, n * scale)),
            input: in_sp,
            outer: shape[0] * shape[1],
        };
        let out_shape = vec![shape[0], shape[1], in_sp[0] * scale, in_sp[1] * scale, in_sp[2] * scale];
        let x = self.value(input).data();
        let mut out = vec![0.0; out_shape.iter().product()];
        func.for_each(|i, o, w| out[o] += w * x[i]);
        let out = Tensor::new(out_shape, out)?;
        self.record(Box::new(func), vec![input], out)
    }
}

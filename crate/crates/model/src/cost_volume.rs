//! Concatenation cost volume.
//!
//! At disparity index `d`, channels `0..C` carry the left features and
//! channels `C..2C` the right features shifted by `d` toward larger `w`:
//! `volume[n, :, d, h, w] = concat(fL[n, :, h, w], fR[n, :, h, w - d])`,
//! zero where `w - d < 0`.

use sled_tensor::{BackwardCtx, Function, Tape, Tensor, Var};

use crate::error::{ModelError, Result};

struct ConcatShift {
    disparities: usize,
}

impl ConcatShift {
    fn forward(&self, left: &Tensor, right: &Tensor) -> Tensor {
        let [n, c, h, w] = dims4(left.shape());
        let d = self.disparities;
        let mut out = Tensor::zeros(vec![n, 2 * c, d, h, w]);
        let (l, r) = (left.data(), right.data());
        let data = out.data_mut();
        for nn in 0..n {
            for ch in 0..c {
                let src = (nn * c + ch) * h * w;
                for dd in 0..d {
                    for y in 0..h {
                        let row = src + y * w;
                        let dst_l = ((((nn * 2 * c) + ch) * d + dd) * h + y) * w;
                        let dst_r = ((((nn * 2 * c) + c + ch) * d + dd) * h + y) * w;
                        data[dst_l..dst_l + w].copy_from_slice(&l[row..row + w]);
                        if dd < w {
                            data[dst_r + dd..dst_r + w].copy_from_slice(&r[row..row + w - dd]);
                        }
                    }
                }
            }
        }
        out
    }
}

fn dims4(shape: &[usize]) -> [usize; 4] {
    [shape[0], shape[1], shape[2], shape[3]]
}

impl Function for ConcatShift {
    fn name(&self) -> &'static str {
        "cost_volume"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> sled_tensor::Result<Vec<Option<Tensor>>> {
        let [n, c, h, w] = dims4(ctx.inputs[0].shape());
        let d = self.disparities;
        let g = ctx.grad.data();
        let mut dl = vec![0.0; n * c * h * w];
        let mut dr = vec![0.0; n * c * h * w];
        for nn in 0..n {
            for ch in 0..c {
                let dst = (nn * c + ch) * h * w;
                for dd in 0..d {
                    for y in 0..h {
                        let row = dst + y * w;
                        let src_l = ((((nn * 2 * c) + ch) * d + dd) * h + y) * w;
                        let src_r = ((((nn * 2 * c) + c + ch) * d + dd) * h + y) * w;
                        for x in 0..w {
                            dl[row + x] += g[src_l + x];
                        }
                        for x in dd..w {
                            dr[row + x - dd] += g[src_r + x];
                        }
                    }
                }
            }
        }
        let shape = ctx.inputs[0].shape().to_vec();
        Ok(vec![
            ctx.needs[0].then(|| Tensor::new(shape.clone(), dl)).transpose()?,
            ctx.needs[1].then(|| Tensor::new(shape, dr)).transpose()?,
        ])
    }
}

/// Builds the `[N, 2C, max_disp/4, H/4, W/4]` volume from 1/4-scale features.
pub fn build_cost_volume(tape: &mut Tape, left: Var, right: Var, max_disp: usize) -> Result<Var> {
    let (ls, rs) = (tape.shape(left).to_vec(), tape.shape(right).to_vec());
    if ls.len() != 4 || ls != rs {
        return Err(ModelError::Shape(format!("left features {ls:?} and right features {rs:?} must be equal rank-4")));
    }
    if max_disp == 0 || max_disp % 4 != 0 {
        return Err(ModelError::Parameter(format!("max_disp must be a positive multiple of 4, got {max_disp}")));
    }
    let disparities = max_disp / 4;
    if disparities > ls[3] {
        return Err(ModelError::Parameter(format!(
            "max_disp/4 = {disparities} exceeds feature width {}",
            ls[3]
        )));
    }
    let func = ConcatShift { disparities };
    let out = func.forward(tape.value(left), tape.value(right));
    Ok(tape.record(Box::new(func), vec![left, right], out)?)
}

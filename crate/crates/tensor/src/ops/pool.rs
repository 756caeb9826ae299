use crate::error::{Result, TensorError};
use crate::tape::{BackwardCtx, Function, Tape, Var};
use crate::tensor::Tensor;

/// Window placement shared by forward and backward. Spatial axes are
/// normalised to three; missing leading axes get extent 1 and window 1.
struct PoolGeom {
    outer: usize,
    input: [usize; 3],
    output: [usize; 3],
    window: [usize; 3],
    stride: [usize; 3],
    out_shape: Vec<usize>,
}

impl PoolGeom {
    fn new(shape: &[usize], window: usize, stride: usize) -> Result<Self> {
        const OP: &str = "avg_pool";
        if window == 0 || stride == 0 {
            return Err(TensorError::param(OP, "window and stride must be >= 1"));
        }
        let rank = shape.len();
        if !(3..=5).contains(&rank) {
            return Err(TensorError::dim(OP, None, format!("input must be rank 3, 4 or 5, got {rank}")));
        }
        let spatial = rank - 2;
        let mut input = [1; 3];
        let mut win = [1; 3];
        let mut st = [1; 3];
        for a in 3 - spatial..3 {
            input[a] = shape[a + rank - 3];
            win[a] = window;
            st[a] = stride;
        }
        let mut output = [1; 3];
        for a in 3 - spatial..3 {
            let axis = a + rank - 3;
            if win[a] > input[a] {
                return Err(TensorError::dim(
                    OP,
                    Some(axis),
                    format!("window {} larger than extent {}", win[a], input[a]),
                ));
            }
            if (input[a] - win[a]) % st[a] != 0 {
                return Err(TensorError::dim(
                    OP,
                    Some(axis),
                    format!("window {} / stride {} does not cover extent {}", win[a], st[a], input[a]),
                ));
            }
            output[a] = (input[a] - win[a]) / st[a] + 1;
        }
        let mut out_shape = shape[..2].to_vec();
        out_shape.extend_from_slice(&output[3 - spatial..]);
        Ok(PoolGeom { outer: shape[0] * shape[1], input, output, window: win, stride: st, out_shape })
    }

    /// Calls `f(input_index, output_index)` for every window membership.
    fn for_each(&self, mut f: impl FnMut(usize, usize)) {
        let [id, ih, iw] = self.input;
        let [od, oh, ow] = self.output;
        let in_plane = id * ih * iw;
        let out_plane = od * oh * ow;
        for c in 0..self.outer {
            for oz in 0..od {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let o = c * out_plane + (oz * oh + oy) * ow + ox;
                        for wz in 0..self.window[0] {
                            let z = oz * self.stride[0] + wz;
                            for wy in 0..self.window[1] {
                                let y = oy * self.stride[1] + wy;
                                let row = c * in_plane + (z * ih + y) * iw + ox * self.stride[2];
                                for wx in 0..self.window[2] {
                                    f(row + wx, o);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn window_size(&self) -> f64 {
        self.window.iter().product::<usize>() as f64
    }
}

struct AvgPool {
    geom: PoolGeom,
}

impl Function for AvgPool {
    fn name(&self) -> &'static str {
        "avg_pool"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let inv = 1.0 / self.geom.window_size();
        let grad = ctx.grad.data();
        let mut dx = vec![0.0; ctx.inputs[0].numel()];
        self.geom.for_each(|i, o| dx[i] += grad[o] * inv);
        Ok(vec![Some(Tensor::new(ctx.inputs[0].shape().to_vec(), dx)?)])
    }
}

impl Tape {
    /// Mean over non-overlapping or strided windows on every spatial axis,
    /// without padding. Windows must tile the input exactly.
    pub fn avg_pool(&mut self, input: Var, window: usize, stride: usize) -> Result<Var> {
        let geom = PoolGeom::new(self.shape(input), window, stride)?;
        let inv = 1.0 / geom.window_size();
        let x = self.value(input).data();
        let mut out = vec![0.0; geom.out_shape.iter().product()];
        geom.for_each(|i, o| out[o] += x[i]);
        out.iter_mut().for_each(|v| *v *= inv);
        let out = Tensor::new(geom.out_shape.clone(), out)?;
        self.record(Box::new(AvgPool { geom }), vec![input], out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_average() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let y = tape.avg_pool(x, 2, 2).unwrap();
        assert_eq!(tape.value(y).data(), &[1.5, 3.5]);
    }

    #[test]
    fn constant_stays_constant() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(vec![2, 3, 4, 4, 8], 7.0));
        let y = tape.avg_pool(x, 2, 2).unwrap();
        assert_eq!(tape.shape(y), &[2, 3, 2, 2, 4]);
        assert!(tape.value(y).data().iter().all(|&v| v == 7.0));
        let z = tape.avg_pool(x, 4, 4).unwrap();
        assert!(tape.value(z).data().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn oversize_window_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(vec![1, 1, 2, 8, 8]));
        assert!(matches!(
            tape.avg_pool(x, 4, 4),
            Err(TensorError::Dimension { axis: Some(2), .. })
        ));
    }

    #[test]
    fn non_covering_window_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(vec![1, 1, 5, 5]));
        assert!(tape.avg_pool(x, 2, 2).is_err());
    }

    #[test]
    fn gradient_spreads_evenly() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(vec![1, 1, 2, 2, 2]), true);
        let y = tape.avg_pool(x, 2, 2).unwrap();
        let loss = tape.sum(y).unwrap();
        tape.backward(loss).unwrap();
        assert!(tape.grad(x).unwrap().data().iter().all(|&g| g == 0.125));
    }
}

//! 2-D and 3-D cross-correlation (no kernel flip) with zero padding,
//! lowered to GEMM through an im2col buffer.

use crate::error::{Result, TensorError};
use crate::tape::{BackwardCtx, Function, Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl ConvSpec {
    pub fn new(stride: usize, padding: usize, dilation: usize) -> Self {
        ConvSpec { stride, padding, dilation }
    }

    /// Stride 1 with the padding that preserves extent for an odd kernel.
    pub fn same(kernel: usize, dilation: usize) -> Self {
        ConvSpec { stride: 1, padding: dilation * (kernel - 1) / 2, dilation }
    }
}

impl Default for ConvSpec {
    fn default() -> Self {
        ConvSpec { stride: 1, padding: 0, dilation: 1 }
    }
}

/// Output extent along one axis.
pub fn conv_out_extent(input: usize, kernel: usize, spec: ConvSpec) -> Option<usize> {
    let span = spec.dilation * (kernel - 1) + 1;
    let padded = input + 2 * spec.padding;
    (padded >= span).then(|| (padded - span) / spec.stride + 1)
}

/// Shapes normalised to three spatial axes; 2-D convs get a unit depth axis.
#[derive(Clone, Debug)]
struct Geometry {
    batch: usize,
    in_ch: usize,
    out_ch: usize,
    input: [usize; 3],
    kernel: [usize; 3],
    output: [usize; 3],
    stride: [usize; 3],
    pad: [usize; 3],
    dil: [usize; 3],
    out_shape: Vec<usize>,
}

impl Geometry {
    fn new(input: &[usize], weight: &[usize], spec: ConvSpec) -> Result<Self> {
        const OP: &str = "conv";
        if spec.stride == 0 || spec.dilation == 0 {
            return Err(TensorError::param(OP, "stride and dilation must be >= 1"));
        }
        let rank = input.len();
        if rank != 4 && rank != 5 {
            return Err(TensorError::dim(OP, None, format!("input must be rank 4 or 5, got {rank}")));
        }
        if weight.len() != rank {
            return Err(TensorError::dim(
                OP,
                None,
                format!("weight rank {} does not match input rank {rank}", weight.len()),
            ));
        }
        if weight[1] != input[1] {
            return Err(TensorError::dim(
                OP,
                Some(1),
                format!("input has {} channels, weight expects {}", input[1], weight[1]),
            ));
        }
        let spatial = rank - 2;
        let lift = |v: &[usize], fill: usize| -> [usize; 3] {
            if spatial == 2 {
                [fill, v[0], v[1]]
            } else {
                [v[0], v[1], v[2]]
            }
        };
        let in_sp = lift(&input[2..], 1);
        let k_sp = lift(&weight[2..], 1);
        let s = spec.stride;
        let p = spec.padding;
        let d = spec.dilation;
        let (stride, pad, dil) = if spatial == 2 {
            ([1, s, s], [0, p, p], [1, d, d])
        } else {
            ([s; 3], [p; 3], [d; 3])
        };
        let mut out = [0; 3];
        for a in 0..3 {
            let axis_spec = ConvSpec { stride: stride[a], padding: pad[a], dilation: dil[a] };
            out[a] = conv_out_extent(in_sp[a], k_sp[a], axis_spec).ok_or_else(|| {
                let axis = if spatial == 2 { a + 1 } else { a + 2 };
                TensorError::dim(
                    OP,
                    Some(axis),
                    format!(
                        "kernel extent {} (dilation {}) does not fit padded input {}",
                        k_sp[a],
                        dil[a],
                        in_sp[a] + 2 * pad[a]
                    ),
                )
            })?;
        }
        let mut out_shape = vec![input[0], weight[0]];
        if spatial == 2 {
            out_shape.extend_from_slice(&out[1..]);
        } else {
            out_shape.extend_from_slice(&out);
        }
        Ok(Geometry {
            batch: input[0],
            in_ch: input[1],
            out_ch: weight[0],
            input: in_sp,
            kernel: k_sp,
            output: out,
            stride,
            pad,
            dil,
            out_shape,
        })
    }

    fn in_plane(&self) -> usize {
        self.input.iter().product()
    }

    fn out_plane(&self) -> usize {
        self.output.iter().product()
    }

    fn col_rows(&self) -> usize {
        self.in_ch * self.kernel.iter().product::<usize>()
    }

    /// Source index along `axis` for output `o` and kernel tap `k`, if in bounds.
    #[inline]
    fn src(&self, axis: usize, o: usize, k: usize) -> Option<usize> {
        let i = (o * self.stride[axis] + k * self.dil[axis]) as isize - self.pad[axis] as isize;
        (i >= 0 && (i as usize) < self.input[axis]).then_some(i as usize)
    }

    /// Unfolds one batch item into a `[C·kd·kh·kw, od·oh·ow]` matrix.
    fn im2col(&self, input: &[f64], cols: &mut [f64]) {
        let [kd, kh, kw] = self.kernel;
        let [od, oh, ow] = self.output;
        let [_, ih, iw] = self.input;
        let plane = self.in_plane();
        let p = self.out_plane();
        let mut row = 0;
        for c in 0..self.in_ch {
            let src = &input[c * plane..(c + 1) * plane];
            for kz in 0..kd {
                for ky in 0..kh {
                    for kx in 0..kw {
                        let dst = &mut cols[row * p..(row + 1) * p];
                        let mut j = 0;
                        for oz in 0..od {
                            let iz = self.src(0, oz, kz);
                            for oy in 0..oh {
                                let iy = self.src(1, oy, ky);
                                match (iz, iy) {
                                    (Some(iz), Some(iy)) => {
                                        let base = (iz * ih + iy) * iw;
                                        for ox in 0..ow {
                                            dst[j + ox] = match self.src(2, ox, kx) {
                                                Some(ix) => src[base + ix],
                                                None => 0.0,
                                            };
                                        }
                                    }
                                    _ => dst[j..j + ow].fill(0.0),
                                }
                                j += ow;
                            }
                        }
                        row += 1;
                    }
                }
            }
        }
    }

    /// Adjoint of [`Geometry::im2col`]: accumulates columns back into the input layout.
    fn col2im(&self, cols: &[f64], input: &mut [f64]) {
        let [kd, kh, kw] = self.kernel;
        let [od, oh, ow] = self.output;
        let [_, ih, iw] = self.input;
        let plane = self.in_plane();
        let p = self.out_plane();
        let mut row = 0;
        for c in 0..self.in_ch {
            let dst = &mut input[c * plane..(c + 1) * plane];
            for kz in 0..kd {
                for ky in 0..kh {
                    for kx in 0..kw {
                        let src = &cols[row * p..(row + 1) * p];
                        let mut j = 0;
                        for oz in 0..od {
                            let iz = self.src(0, oz, kz);
                            for oy in 0..oh {
                                if let (Some(iz), Some(iy)) = (iz, self.src(1, oy, ky)) {
                                    let base = (iz * ih + iy) * iw;
                                    for ox in 0..ow {
                                        if let Some(ix) = self.src(2, ox, kx) {
                                            dst[base + ix] += src[j + ox];
                                        }
                                    }
                                }
                                j += ow;
                            }
                        }
                        row += 1;
                    }
                }
            }
        }
    }
}

/// `c = a·b + beta·c` for row-major matrices; `*_t` marks an operand stored transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too small");
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the bounds assertion above covers every element addressed by
    // the given strides, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

struct Conv {
    geom: Geometry,
    has_bias: bool,
}

impl Function for Conv {
    fn name(&self) -> &'static str {
        "conv"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let g = &self.geom;
        let input = ctx.inputs[0].data();
        let weight = ctx.inputs[1].data();
        let grad = ctx.grad.data();
        let rows = g.col_rows();
        let p = g.out_plane();
        let in_len = g.in_ch * g.in_plane();
        let out_len = g.out_ch * p;

        let mut cols = vec![0.0; rows * p];
        let mut d_input = ctx.needs[0].then(|| vec![0.0; input.len()]);
        let mut d_weight = ctx.needs[1].then(|| vec![0.0; weight.len()]);
        for n in 0..g.batch {
            let gout = &grad[n * out_len..(n + 1) * out_len];
            if let Some(dw) = d_weight.as_mut() {
                g.im2col(&input[n * in_len..(n + 1) * in_len], &mut cols);
                gemm(g.out_ch, p, rows, gout, false, &cols, true, 1.0, dw);
            }
            if let Some(dx) = d_input.as_mut() {
                gemm(rows, g.out_ch, p, weight, true, gout, false, 0.0, &mut cols);
                g.col2im(&cols, &mut dx[n * in_len..(n + 1) * in_len]);
            }
        }
        let mut grads = vec![
            d_input.map(|d| Tensor::new(ctx.inputs[0].shape().to_vec(), d)).transpose()?,
            d_weight.map(|d| Tensor::new(ctx.inputs[1].shape().to_vec(), d)).transpose()?,
        ];
        if self.has_bias {
            let db = ctx.needs[2].then(|| {
                let mut db = vec![0.0; g.out_ch];
                for n in 0..g.batch {
                    for (k, acc) in db.iter_mut().enumerate() {
                        let off = n * out_len + k * p;
                        *acc += grad[off..off + p].iter().sum::<f64>();
                    }
                }
                Tensor::new(vec![g.out_ch], db).expect("bias shape")
            });
            grads.push(db);
        }
        Ok(grads)
    }
}

impl Tape {
    /// Convolution over rank-4 `[N,C,H,W]` or rank-5 `[N,C,D,H,W]` input
    /// with weight `[K,C,k...]` and optional bias `[K]`.
    pub fn conv(&mut self, input: Var, weight: Var, bias: Option<Var>, spec: ConvSpec) -> Result<Var> {
        let geom = Geometry::new(self.shape(input), self.shape(weight), spec)?;
        if let Some(b) = bias {
            if self.shape(b) != [geom.out_ch] {
                return Err(TensorError::dim(
                    "conv",
                    Some(0),
                    format!("bias shape {:?} does not match {} output channels", self.shape(b), geom.out_ch),
                ));
            }
        }
        let out = conv_forward(&geom, self.value(input), self.value(weight), bias.map(|b| self.value(b)));
        let mut inputs = vec![input, weight];
        inputs.extend(bias);
        self.record(Box::new(Conv { geom, has_bias: bias.is_some() }), inputs, out)
    }
}

fn conv_forward(g: &Geometry, input: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Tensor {
    let rows = g.col_rows();
    let p = g.out_plane();
    let in_len = g.in_ch * g.in_plane();
    let out_len = g.out_ch * p;
    let mut out = vec![0.0; g.batch * out_len];
    let mut cols = vec![0.0; rows * p];
    for n in 0..g.batch {
        g.im2col(&input.data()[n * in_len..(n + 1) * in_len], &mut cols);
        let dst = &mut out[n * out_len..(n + 1) * out_len];
        gemm(g.out_ch, rows, p, weight.data(), false, &cols, false, 0.0, dst);
        if let Some(b) = bias {
            for (k, &bk) in b.data().iter().enumerate() {
                dst[k * p..(k + 1) * p].iter_mut().for_each(|v| *v += bk);
            }
        }
    }
    Tensor::new(g.out_shape.clone(), out).expect("conv output shape")
}

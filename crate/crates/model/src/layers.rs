use sled_tensor::{BatchStats, ConvSpec, NormMode, Tape, Tensor, Var, BN_EPS};

use crate::error::Result;
use crate::params::{BufferId, Builder, Init, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Running-statistics update produced by one train-mode batch-norm call.
#[derive(Clone, Debug)]
pub struct NormUpdate {
    pub mean: BufferId,
    pub var: BufferId,
    pub stats: BatchStats,
}

/// State threaded through a forward pass.
pub struct Ctx<'a> {
    pub tape: &'a mut Tape,
    pub params: &'a [Var],
    pub store: &'a ParamStore,
    pub mode: Mode,
    pub updates: Vec<NormUpdate>,
}

impl<'a> Ctx<'a> {
    pub fn new(tape: &'a mut Tape, params: &'a [Var], store: &'a ParamStore, mode: Mode) -> Self {
        Ctx { tape, params, store, mode, updates: Vec::new() }
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.params[id.0]
    }

    pub fn scoped<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        self.tape.enter_scope(name);
        let out = f(self);
        self.tape.exit_scope();
        out
    }
}

fn kernel_shape(out: usize, inp: usize, kernel: usize, rank: usize) -> Vec<usize> {
    let mut shape = vec![out, inp];
    shape.extend(std::iter::repeat_n(kernel, rank));
    shape
}

/// Plain convolution, optionally with bias; used for output projections.
pub struct Conv {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub spec: ConvSpec,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        b: &mut Builder,
        name: &str,
        inp: usize,
        out: usize,
        kernel: usize,
        rank: usize,
        spec: ConvSpec,
        bias: bool,
    ) -> Result<Self> {
        b.scoped(name, |b| {
            let weight = b.param("weight", &kernel_shape(out, inp, kernel, rank), Init::He)?;
            let bias = if bias { Some(b.param("bias", &[out], Init::Zeros)?) } else { None };
            Ok(Conv { weight, bias, spec })
        })
    }

    pub fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        let (w, b) = (ctx.var(self.weight), self.bias.map(|b| ctx.var(b)));
        Ok(ctx.tape.conv(x, w, b, self.spec)?)
    }
}

/// Convolution (no bias) → batch norm → optional ReLU.
pub struct ConvBn {
    pub weight: ParamId,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: BufferId,
    pub running_var: BufferId,
    pub spec: ConvSpec,
}

impl ConvBn {
    pub fn build(
        b: &mut Builder,
        name: &str,
        inp: usize,
        out: usize,
        kernel: usize,
        rank: usize,
        spec: ConvSpec,
    ) -> Result<Self> {
        b.scoped(name, |b| {
            let weight = b.param("weight", &kernel_shape(out, inp, kernel, rank), Init::He)?;
            let gamma = b.param("gamma", &[out], Init::Ones)?;
            let beta = b.param("beta", &[out], Init::Zeros)?;
            let running_mean = b.buffer("running_mean", Tensor::zeros(vec![out]))?;
            let running_var = b.buffer("running_var", Tensor::ones(vec![out]))?;
            Ok(ConvBn { weight, gamma, beta, running_mean, running_var, spec })
        })
    }

    /// Convolution followed by batch norm, without activation.
    pub fn forward_linear(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        let y = ctx.tape.conv(x, ctx.var(self.weight), None, self.spec)?;
        let (g, bt) = (ctx.var(self.gamma), ctx.var(self.beta));
        let mode = match ctx.mode {
            Mode::Train => NormMode::Train,
            Mode::Eval => NormMode::Eval {
                mean: ctx.store.buffer(self.running_mean).data(),
                var: ctx.store.buffer(self.running_var).data(),
            },
        };
        let (out, stats) = ctx.tape.batchnorm(y, g, bt, mode, BN_EPS)?;
        if let Some(stats) = stats {
            ctx.updates.push(NormUpdate { mean: self.running_mean, var: self.running_var, stats });
        }
        Ok(out)
    }

    pub fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        let y = self.forward_linear(ctx, x)?;
        Ok(ctx.tape.relu(y)?)
    }
}

/// `x + relu(bn(conv(x)))`.
pub struct ResidualBlock {
    pub body: ConvBn,
}

impl ResidualBlock {
    /// `rank` is the number of spatial axes (2 for images, 3 for volumes).
    pub fn build(b: &mut Builder, name: &str, channels: usize, dilation: usize, rank: usize) -> Result<Self> {
        let body = ConvBn::build(b, name, channels, channels, 3, rank, ConvSpec::same(3, dilation))?;
        Ok(ResidualBlock { body })
    }

    pub fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        let y = self.body.forward(ctx, x)?;
        Ok(ctx.tape.add(x, y)?)
    }
}

/// 3×3×3 conv-bn-relu followed by a bias-free 3×3×3 projection to one
/// channel, producing a matching-cost volume.
pub struct CostHead {
    pub conv: ConvBn,
    pub proj: Conv,
}

impl CostHead {
    pub fn build(b: &mut Builder, name: &str, channels: usize) -> Result<Self> {
        b.scoped(name, |b| {
            let conv = ConvBn::build(b, "conv", channels, channels, 3, 3, ConvSpec::same(3, 1))?;
            let proj = Conv::build(b, "proj", channels, 1, 3, 3, ConvSpec::same(3, 1), false)?;
            Ok(CostHead { conv, proj })
        })
    }

    pub fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        let y = self.conv.forward(ctx, x)?;
        self.proj.forward(ctx, y)
    }
}

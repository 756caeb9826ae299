//! 3-D cost-volume regularizers.
//!
//! All variants share a two-layer stem that maps the `2C`-channel volume to
//! `reg_channels`, and every variant emits a list of one-channel cost
//! volumes at 1/4 scale, earliest (intermediate supervision) first.
//!
//! * [`Sled`]: one deep encoder from 1/4 to 1/32 scale (residual blocks per
//!   scale, average pooling plus a transition conv between scales) and one
//!   decoder with three stages of trilinear ×2 upsampling, a 1×1×1 channel
//!   matching conv, a skip sum with the encoder feature of the same scale,
//!   and a residual block built on a dilated 3×3×3 conv.
//! * [`StackedHourglass`]: `k` hourglasses, each with four stride-2 convs
//!   down to 1/64 scale and four upsampling stages back, one supervised
//!   output per hourglass.
//! * [`Scc`]: four stride-1 conv layers.

use sled_tensor::{ConvSpec, Var};

use crate::config::{ModelConfig, Regularizer};
use crate::error::{ModelError, Result};
use crate::layers::{ConvBn, CostHead, Ctx, ResidualBlock};
use crate::params::Builder;

struct Stem {
    layers: [ConvBn; 2],
}

impl Stem {
    fn build(b: &mut Builder, cfg: &ModelConfig) -> Result<Self> {
        let r = cfg.reg_channels;
        b.scoped("stem", |b| {
            Ok(Stem {
                layers: [
                    ConvBn::build(b, "conv0", 2 * cfg.feat_channels, r, 3, 3, ConvSpec::same(3, 1))?,
                    ConvBn::build(b, "conv1", r, r, 3, 3, ConvSpec::same(3, 1))?,
                ],
            })
        })
    }

    fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        ctx.scoped("stem", |ctx| {
            let x = self.layers[0].forward(ctx, x)?;
            self.layers[1].forward(ctx, x)
        })
    }
}

struct EncoderGroup {
    /// Present for every group after the first: applied after pooling.
    transition: Option<ConvBn>,
    blocks: Vec<ResidualBlock>,
}

struct DecoderStage {
    reduce: ConvBn,
    fuse: ResidualBlock,
}

pub struct Sled {
    groups: Vec<EncoderGroup>,
    initial_head: CostHead,
    stages: Vec<DecoderStage>,
    refined_head: CostHead,
}

impl Sled {
    fn build(b: &mut Builder, cfg: &ModelConfig) -> Result<Self> {
        b.scoped("sled", |b| {
            let mut groups = Vec::new();
            for (g, &count) in cfg.encoder_block_layout.iter().enumerate() {
                let ch = cfg.encoder_channels(g);
                let group = b.scoped(&format!("encoder{g}"), |b| {
                    let transition = if g == 0 {
                        None
                    } else {
                        let prev = cfg.encoder_channels(g - 1);
                        Some(ConvBn::build(b, "transition", prev, ch, 3, 3, ConvSpec::same(3, 1))?)
                    };
                    let blocks = (0..count)
                        .map(|i| ResidualBlock::build(b, &format!("block{i}"), ch, 1, 3))
                        .collect::<Result<_>>()?;
                    Ok(EncoderGroup { transition, blocks })
                })?;
                groups.push(group);
            }
            let initial_head = CostHead::build(b, "initial_head", cfg.reg_channels)?;
            let mut stages = Vec::new();
            for s in (0..3).rev() {
                let (from, to) = (cfg.encoder_channels(s + 1), cfg.encoder_channels(s));
                let stage = b.scoped(&format!("decoder{s}"), |b| {
                    Ok(DecoderStage {
                        reduce: ConvBn::build(b, "reduce", from, to, 1, 3, ConvSpec::default())?,
                        fuse: ResidualBlock::build(b, "fuse", to, cfg.atrous_dilation, 3)?,
                    })
                })?;
                stages.push(stage);
            }
            let refined_head = CostHead::build(b, "refined_head", cfg.reg_channels)?;
            Ok(Sled { groups, initial_head, stages, refined_head })
        })
    }

    fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Vec<Var>> {
        ctx.scoped("sled", |ctx| {
            let mut skips = Vec::with_capacity(self.groups.len());
            let mut x = x;
            ctx.tape.enter_scope("encoder");
            for (g, group) in self.groups.iter().enumerate() {
                if let Some(t) = &group.transition {
                    x = ctx.tape.avg_pool(x, 2, 2)?;
                    x = t.forward(ctx, x)?;
                }
                for (i, block) in group.blocks.iter().enumerate() {
                    x = ctx.scoped(&format!("group{g}.block{i}"), |ctx| block.forward(ctx, x))?;
                }
                skips.push(x);
            }
            ctx.tape.exit_scope();
            let initial = ctx.scoped("initial_head", |ctx| self.initial_head.forward(ctx, skips[0]))?;

            ctx.tape.enter_scope("decoder");
            let mut y = x;
            for (i, stage) in self.stages.iter().enumerate() {
                let skip = skips[skips.len() - 2 - i];
                y = ctx.scoped(&format!("stage{i}"), |ctx| {
                    let up = ctx.tape.trilinear_upsample(y, 2)?;
                    let up = stage.reduce.forward(ctx, up)?;
                    let sum = ctx.scoped("skip", |ctx| Ok(ctx.tape.add(up, skip)?))?;
                    ctx.scoped("fuse", |ctx| stage.fuse.forward(ctx, sum))
                })?;
            }
            ctx.tape.exit_scope();
            let refined = ctx.scoped("refined_head", |ctx| self.refined_head.forward(ctx, y))?;
            Ok(vec![initial, refined])
        })
    }
}

struct Hourglass {
    down: [ConvBn; 4],
    up: [ConvBn; 4],
    head: CostHead,
}

impl Hourglass {
    fn build(b: &mut Builder, cfg: &ModelConfig, index: usize) -> Result<Self> {
        let (r, m) = (cfg.reg_channels, cfg.hg_channels);
        let stride2 = ConvSpec::new(2, 1, 1);
        let same = ConvSpec::same(3, 1);
        b.scoped(&format!("hourglass{index}"), |b| {
            Ok(Hourglass {
                down: [
                    ConvBn::build(b, "down0", r, m, 3, 3, stride2)?,
                    ConvBn::build(b, "down1", m, m, 3, 3, stride2)?,
                    ConvBn::build(b, "down2", m, m, 3, 3, stride2)?,
                    ConvBn::build(b, "down3", m, m, 3, 3, stride2)?,
                ],
                // up[i] restores the resolution of down[i]'s input
                up: [
                    ConvBn::build(b, "up0", m, r, 3, 3, same)?,
                    ConvBn::build(b, "up1", m, m, 3, 3, same)?,
                    ConvBn::build(b, "up2", m, m, 3, 3, same)?,
                    ConvBn::build(b, "up3", m, m, 3, 3, same)?,
                ],
                head: CostHead::build(b, "head", r)?,
            })
        })
    }

    /// Returns `(features at 1/4 scale, cost)`.
    fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<(Var, Var)> {
        let mut levels = vec![x];
        ctx.tape.enter_scope("down");
        for conv in &self.down {
            let next = conv.forward(ctx, *levels.last().expect("non-empty"))?;
            levels.push(next);
        }
        ctx.tape.exit_scope();
        ctx.tape.enter_scope("up");
        let mut y = levels[4];
        for i in (0..4).rev() {
            let up = ctx.tape.trilinear_upsample(y, 2)?;
            let up = self.up[i].forward_linear(ctx, up)?;
            let sum = ctx.scoped("skip", |ctx| Ok(ctx.tape.add(up, levels[i])?))?;
            y = ctx.tape.relu(sum)?;
        }
        ctx.tape.exit_scope();
        let cost = ctx.scoped("head", |ctx| self.head.forward(ctx, y))?;
        Ok((y, cost))
    }
}

pub struct StackedHourglass {
    initial_head: CostHead,
    stages: Vec<Hourglass>,
}

impl StackedHourglass {
    fn build(b: &mut Builder, cfg: &ModelConfig, k: usize) -> Result<Self> {
        if !(1..=3).contains(&k) {
            return Err(ModelError::Parameter(format!("hourglass count must be 1, 2 or 3, got {k}")));
        }
        let initial_head = b.scoped("hg", |b| CostHead::build(b, "initial_head", cfg.reg_channels))?;
        let stages = (0..k).map(|i| Hourglass::build(b, cfg, i)).collect::<Result<_>>()?;
        Ok(StackedHourglass { initial_head, stages })
    }

    fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Vec<Var>> {
        let mut costs = vec![ctx.scoped("hg.initial_head", |ctx| self.initial_head.forward(ctx, x))?];
        let mut y = x;
        for (i, stage) in self.stages.iter().enumerate() {
            let (features, cost) = ctx.scoped(&format!("hourglass{i}"), |ctx| stage.forward(ctx, y))?;
            y = features;
            costs.push(cost);
        }
        Ok(costs)
    }
}

pub struct Scc {
    layers: [ConvBn; 4],
    initial_head: CostHead,
    refined_head: CostHead,
}

impl Scc {
    pub fn build(b: &mut Builder, cfg: &ModelConfig) -> Result<Self> {
        let r = cfg.reg_channels;
        let same = ConvSpec::same(3, 1);
        b.scoped("scc", |b| {
            Ok(Scc {
                layers: [
                    ConvBn::build(b, "conv0", r, r, 3, 3, same)?,
                    ConvBn::build(b, "conv1", r, r, 3, 3, same)?,
                    ConvBn::build(b, "conv2", r, r, 3, 3, same)?,
                    ConvBn::build(b, "conv3", r, r, 3, 3, same)?,
                ],
                initial_head: CostHead::build(b, "initial_head", r)?,
                refined_head: CostHead::build(b, "refined_head", r)?,
            })
        })
    }

    /// The four stride-1 layers alone, under scope `cascade`.
    pub fn cascade(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        ctx.scoped("cascade", |ctx| {
            let mut y = x;
            for layer in &self.layers {
                y = layer.forward(ctx, y)?;
            }
            Ok(y)
        })
    }

    fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Vec<Var>> {
        ctx.scoped("scc", |ctx| {
            let initial = ctx.scoped("initial_head", |ctx| self.initial_head.forward(ctx, x))?;
            let y = self.cascade(ctx, x)?;
            let refined = ctx.scoped("refined_head", |ctx| self.refined_head.forward(ctx, y))?;
            Ok(vec![initial, refined])
        })
    }
}

enum Net {
    Sled(Sled),
    Scc(Scc),
    Hourglass(StackedHourglass),
}

/// Stem plus the configured regularizer network.
pub struct CostRegularizer {
    stem: Stem,
    net: Net,
    divisor: usize,
}

impl CostRegularizer {
    pub fn build(b: &mut Builder, cfg: &ModelConfig) -> Result<Self> {
        let stem = Stem::build(b, cfg)?;
        let net = match cfg.regularizer {
            Regularizer::Sled => Net::Sled(Sled::build(b, cfg)?),
            Regularizer::Scc => Net::Scc(Scc::build(b, cfg)?),
            Regularizer::Hourglass(k) => Net::Hourglass(StackedHourglass::build(b, cfg, k)?),
        };
        Ok(CostRegularizer { stem, net, divisor: cfg.regularizer.volume_divisor() })
    }

    /// Maps a `[N, 2C, D, H, W]` volume to one-channel costs, earliest first.
    pub fn forward(&self, ctx: &mut Ctx<'_>, volume: Var) -> Result<Vec<Var>> {
        let shape = ctx.tape.shape(volume).to_vec();
        if shape.len() != 5 {
            return Err(ModelError::Shape(format!("cost volume must be rank 5, got {shape:?}")));
        }
        if let Some(axis) = (2..5).find(|&a| shape[a] % self.divisor != 0) {
            return Err(ModelError::Shape(format!(
                "cost volume extents {:?} must be divisible by {} (axis {axis})",
                &shape[2..],
                self.divisor
            )));
        }
        let x = self.stem.forward(ctx, volume)?;
        match &self.net {
            Net::Sled(n) => n.forward(ctx, x),
            Net::Scc(n) => n.forward(ctx, x),
            Net::Hourglass(n) => n.forward(ctx, x),
        }
    }
}

//! Reduced Siamese 2-D feature extractor: two stride-2 stages down to 1/4
//! scale with residual refinement, ending in a linear 1×1 projection.

use sled_tensor::{ConvSpec, Var};

use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::layers::{Conv, ConvBn, Ctx, ResidualBlock};
use crate::params::Builder;

pub struct Backbone {
    stem: ConvBn,
    half: ResidualBlock,
    down: ConvBn,
    quarter: [ResidualBlock; 2],
    proj: Conv,
    divisor: usize,
}

impl Backbone {
    pub fn build(b: &mut Builder, cfg: &ModelConfig) -> Result<Self> {
        let (w, c) = (cfg.backbone_channels, cfg.feat_channels);
        b.scoped("backbone", |b| {
            Ok(Backbone {
                stem: ConvBn::build(b, "stem", 3, w, 3, 2, ConvSpec::new(2, 1, 1))?,
                half: ResidualBlock::build(b, "half", w, 1, 2)?,
                down: ConvBn::build(b, "down", w, c, 3, 2, ConvSpec::new(2, 1, 1))?,
                quarter: [
                    ResidualBlock::build(b, "quarter0", c, 1, 2)?,
                    ResidualBlock::build(b, "quarter1", c, 1, 2)?,
                ],
                proj: Conv::build(b, "proj", c, c, 1, 2, ConvSpec::default(), true)?,
                divisor: cfg.image_divisor(),
            })
        })
    }

    /// Closed-form trainable-scalar count for the given widths.
    pub fn expected_param_count(cfg: &ModelConfig) -> usize {
        let (w, c) = (cfg.backbone_channels, cfg.feat_channels);
        let conv_bn = |i: usize, o: usize| 9 * i * o + 2 * o;
        conv_bn(3, w) + conv_bn(w, w) + conv_bn(w, c) + 2 * conv_bn(c, c) + (c * c + c)
    }

    /// `[N,3,H,W]` image → `[N,C,H/4,W/4]` features.
    pub fn extract(&self, ctx: &mut Ctx<'_>, image: Var) -> Result<Var> {
        let shape = ctx.tape.shape(image).to_vec();
        if shape.len() != 4 || shape[1] != 3 {
            return Err(ModelError::Shape(format!("expected [N,3,H,W] image, got {shape:?}")));
        }
        let (h, w) = (shape[2], shape[3]);
        if h % self.divisor != 0 || w % self.divisor != 0 {
            return Err(ModelError::Shape(format!(
                "image height and width must be divisible by {}, got {h}x{w}",
                self.divisor
            )));
        }
        ctx.scoped("backbone", |ctx| {
            let x = self.stem.forward(ctx, image)?;
            let x = self.half.forward(ctx, x)?;
            let x = self.down.forward(ctx, x)?;
            let x = self.quarter[0].forward(ctx, x)?;
            let x = self.quarter[1].forward(ctx, x)?;
            self.proj.forward(ctx, x)
        })
    }
}

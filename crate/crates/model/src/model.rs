use sled_tensor::{Tape, Tensor, Var};

use crate::backbone::Backbone;
use crate::config::ModelConfig;
use crate::cost_volume::build_cost_volume;
use crate::disparity::regress_disparity;
use crate::error::{ModelError, Result};
use crate::layers::{Ctx, Mode, NormUpdate};
use crate::params::{Builder, ParamStore};
use crate::regularizer::CostRegularizer;

/// Tape handles produced by one forward pass.
pub struct Forward {
    /// Full-resolution `[N,H,W]` disparities, earliest supervision first.
    pub disparities: Vec<Var>,
    /// One-channel 1/4-scale costs matching `disparities`.
    pub costs: Vec<Var>,
    pub volume: Var,
    /// Running-statistics updates; empty in eval mode.
    pub updates: Vec<NormUpdate>,
}

/// Materialised disparities of an inference pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutputs {
    pub initial_disparity: Tensor,
    pub refined_disparity: Tensor,
    /// Every supervised output, earliest first.
    pub all: Vec<Tensor>,
}

/// A configured network together with its parameters and buffers.
pub struct StereoModel {
    config: ModelConfig,
    store: ParamStore,
    backbone: Backbone,
    regularizer: CostRegularizer,
}

impl StereoModel {
    /// Builds the network for `config.resolved()`, initialising weights
    /// from `seed`.
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        let config = config.resolved();
        config.validate()?;
        let mut b = Builder::new(seed);
        let backbone = Backbone::build(&mut b, &config)?;
        let regularizer = CostRegularizer::build(&mut b, &config)?;
        Ok(StereoModel { config, store: b.finish(), backbone, regularizer })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }

    /// One tape leaf per trainable tensor, in registry order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.store.bind(tape)
    }

    pub fn extract_features(&self, tape: &mut Tape, params: &[Var], image: Var, mode: Mode) -> Result<Var> {
        let mut ctx = Ctx::new(tape, params, &self.store, mode);
        self.backbone.extract(&mut ctx, image)
    }

    /// Runs only the regularizer on a prepared cost volume.
    pub fn regularize(
        &self,
        tape: &mut Tape,
        params: &[Var],
        volume: Var,
        mode: Mode,
    ) -> Result<(Vec<Var>, Vec<NormUpdate>)> {
        let mut ctx = Ctx::new(tape, params, &self.store, mode);
        let costs = self.regularizer.forward(&mut ctx, volume)?;
        Ok((costs, ctx.updates))
    }

    pub fn forward(&self, tape: &mut Tape, params: &[Var], left: Var, right: Var, mode: Mode) -> Result<Forward> {
        if tape.shape(left) != tape.shape(right) {
            return Err(ModelError::Shape(format!(
                "left {:?} and right {:?} images differ in shape",
                tape.shape(left),
                tape.shape(right)
            )));
        }
        let mut ctx = Ctx::new(tape, params, &self.store, mode);
        let fl = self.backbone.extract(&mut ctx, left)?;
        let fr = self.backbone.extract(&mut ctx, right)?;
        let volume = build_cost_volume(ctx.tape, fl, fr, self.config.max_disp)?;
        let costs = self.regularizer.forward(&mut ctx, volume)?;
        let disparities = ctx.scoped("regression", |ctx| {
            costs.iter().map(|&c| regress_disparity(ctx.tape, c, self.config.max_disp)).collect::<Result<Vec<_>>>()
        })?;
        Ok(Forward { disparities, costs, volume, updates: ctx.updates })
    }

    /// Folds train-mode batch statistics into the running buffers.
    pub fn apply_updates(&mut self, updates: &[NormUpdate]) {
        for u in updates {
            let mut mean = self.store.buffer(u.mean).data().to_vec();
            let mut var = self.store.buffer(u.var).data().to_vec();
            u.stats.update_running(&mut mean, &mut var);
            self.store.buffer_mut(u.mean).data_mut().copy_from_slice(&mean);
            self.store.buffer_mut(u.var).data_mut().copy_from_slice(&var);
        }
    }

    /// Forward pass without gradient tracking.
    pub fn predict(&self, left: &Tensor, right: &Tensor, mode: Mode) -> Result<ModelOutputs> {
        let mut tape = Tape::new();
        let params: Vec<Var> = self.store.params().iter().map(|p| tape.constant(p.value.clone())).collect();
        let (l, r) = (tape.constant(left.clone()), tape.constant(right.clone()));
        let out = self.forward(&mut tape, &params, l, r, mode)?;
        let all: Vec<Tensor> = out.disparities.iter().map(|&d| tape.value(d).clone()).collect();
        Ok(ModelOutputs {
            initial_disparity: all[0].clone(),
            refined_disparity: all[all.len() - 1].clone(),
            all,
        })
    }
}

/// Exact number of trainable scalars of the network described by `config`.
pub fn count_parameters(config: &ModelConfig) -> Result<usize> {
    Ok(StereoModel::new(config, 0)?.num_parameters())
}

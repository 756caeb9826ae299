use sled_data::{normalize, stack, StereoSample};
use sled_model::{Mode, StereoModel};
use sled_tensor::{Tape, Tensor, TensorError, XorShift64};

use crate::config::TrainConfig;
use crate::error::{Result, TrainError};
use crate::loss::total_loss;
use crate::metrics::{valid_mask, SampleTally};
use crate::optim::Adam;

/// Network-ready tensors for one sample.
pub struct Prepared {
    /// `[3,H,W]`, channel-normalised.
    pub left: Tensor,
    pub right: Tensor,
    /// `[H,W]` ground truth with invalid pixels at 0.
    pub gt: Tensor,
    /// `[H,W]` 0/1 mask of pixels that enter the loss.
    pub mask: Tensor,
}

impl Prepared {
    pub fn new(sample: &StereoSample, max_disp: usize) -> Result<Self> {
        let (h, w) = (sample.height(), sample.width());
        let mask = valid_mask(&sample.gt, max_disp).iter().map(|&m| f64::from(u8::from(m))).collect();
        Ok(Prepared {
            left: normalize(&sample.left)?,
            right: normalize(&sample.right)?,
            gt: Tensor::new(vec![h, w], sample.gt.values().to_vec())?,
            mask: Tensor::new(vec![h, w], mask)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean total loss over the epoch's batches.
    pub loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,loss\n");
        for r in &self.epochs {
            out.push_str(&format!("{},{},{}\n", r.epoch, r.lr, r.loss));
        }
        out
    }
}

/// One optimisation step on a batch; returns the loss before the update.
fn train_step(
    model: &mut StereoModel,
    opt: &mut Adam,
    batch: &[&Prepared],
    weights: &[f64],
    lr: f64,
) -> Result<f64> {
    let left = stack(&batch.iter().map(|p| &p.left).collect::<Vec<_>>())?;
    let right = stack(&batch.iter().map(|p| &p.right).collect::<Vec<_>>())?;
    let gt = stack(&batch.iter().map(|p| &p.gt).collect::<Vec<_>>())?;
    let mask = stack(&batch.iter().map(|p| &p.mask).collect::<Vec<_>>())?;

    let mut tape = Tape::new();
    let params = model.bind(&mut tape);
    let (l, r, g) = (tape.constant(left), tape.constant(right), tape.constant(gt));
    let out = model.forward(&mut tape, &params, l, r, Mode::Train)?;
    let loss = total_loss(&mut tape, &out.disparities, g, &mask, weights)?;
    let value = tape.value(loss).item()?;
    if !value.is_finite() {
        return Ok(value);
    }
    tape.backward(loss)?;
    let grads: Vec<Option<&Tensor>> = params.iter().map(|&p| tape.grad(p)).collect();
    opt.step(lr, model.store_mut().params_mut(), &grads)?;
    model.apply_updates(&out.updates);
    Ok(value)
}

/// Trains `model` in place. Batches are full images in an order reshuffled
/// every epoch from `config.seed`; `on_epoch` sees each record as it is
/// produced.
pub fn train(
    model: &mut StereoModel,
    samples: &[StereoSample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &StereoModel),
) -> Result<TrainLog> {
    if samples.is_empty() {
        return Err(TrainError::Config("training set is empty".into()));
    }
    let outputs = model.config().regularizer.num_outputs();
    config.validate(outputs)?;
    let weights = config.weights(outputs);
    let max_disp = model.config().max_disp;
    let prepared = samples.iter().map(|s| Prepared::new(s, max_disp)).collect::<Result<Vec<_>>>()?;

    let mut rng = XorShift64::new(config.seed);
    let mut opt = Adam::new();
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    for epoch in 0..config.total_epochs() {
        let lr = config.lr_at(epoch).expect("epoch within schedule");
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Prepared> = chunk.iter().map(|&i| &prepared[i]).collect();
            let loss = match train_step(model, &mut opt, &batch, &weights, lr) {
                Err(TrainError::Tensor(TensorError::NonFinite { .. })) => f64::NAN,
                other => other?,
            };
            if !loss.is_finite() {
                return Err(TrainError::Diverged { epoch, loss });
            }
            sum += loss;
            batches += 1;
        }
        let record = EpochRecord { epoch, lr, loss: sum / batches as f64 };
        on_epoch(&record, model);
        log.epochs.push(record);
    }
    Ok(log)
}

/// Per-sample refined predictions `[H,W]` and metric tallies.
pub struct Evaluation {
    pub predictions: Vec<Tensor>,
    pub per_sample: Vec<SampleTally>,
    pub total: SampleTally,
}

pub fn evaluate(model: &StereoModel, samples: &[StereoSample], mode: Mode) -> Result<Evaluation> {
    let max_disp = model.config().max_disp;
    let mut eval = Evaluation { predictions: Vec::new(), per_sample: Vec::new(), total: SampleTally::default() };
    for s in samples {
        let p = Prepared::new(s, max_disp)?;
        let (h, w) = (s.height(), s.width());
        let left = p.left.reshape(vec![1, 3, h, w])?;
        let right = p.right.reshape(vec![1, 3, h, w])?;
        let out = model.predict(&left, &right, mode)?;
        let pred = out.refined_disparity.reshape(vec![h, w])?;
        let tally = SampleTally::collect(pred.data(), &s.gt, s.fg_mask.as_deref(), s.noc_mask.as_deref(), max_disp)?;
        eval.total.merge(&tally);
        eval.per_sample.push(tally);
        eval.predictions.push(pred);
    }
    Ok(eval)
}

/// Aggregate EPE of the refined output over all valid pixels.
pub fn dataset_epe(model: &StereoModel, samples: &[StereoSample], mode: Mode) -> Result<f64> {
    let eval = evaluate(model, samples, mode)?;
    Ok(eval.total.all.report(crate::metrics::Region::All)?.epe)
}

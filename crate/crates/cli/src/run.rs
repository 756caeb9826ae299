//! `train`, `eval`, `predict` and `synth`.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use sled_data::{
    benchmark_specs, load_manifest, read_disparity, write_kitti_disp, write_manifest, write_rgb8, write_sample,
    DisparityMap, ManifestEntry, StereoSample,
};
use sled_model::checkpoint;
use sled_model::StereoModel;
use sled_train::{evaluate, MetricReport, SampleTally};

use crate::colormap::colorize;
use crate::config::RunConfig;
use crate::error::{write_err, CliError, Result};

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| write_err(path, e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON value serialises");
    text.push('\n');
    write_file(path, text)
}

/// Manifest samples, or the synthetic benchmark for the run seed.
pub fn load_samples(cfg: &RunConfig) -> Result<Vec<StereoSample>> {
    match &cfg.data.manifest {
        Some(path) => Ok(load_manifest(path)?.iter().map(|s| s.load()).collect::<sled_data::Result<Vec<_>>>()?),
        None => {
            let d = &cfg.data;
            let max_disp = cfg.model.resolved().max_disp;
            Ok(benchmark_specs(d.count, d.width, d.height, max_disp, cfg.seed)
                .iter()
                .map(|s| s.generate())
                .collect::<sled_data::Result<Vec<_>>>()?)
        }
    }
}

fn checkpoint_path(cfg: &RunConfig, out: &Path) -> Option<PathBuf> {
    match &cfg.checkpoint {
        Some(p) => Some(p.clone()),
        None => {
            let p = out.join("checkpoint.bin");
            p.exists().then_some(p)
        }
    }
}

/// Fresh model from the run seed, restored from the checkpoint if any.
/// Returns whether a checkpoint was loaded.
fn restored_model(cfg: &RunConfig, out: &Path) -> Result<(StereoModel, bool)> {
    let mut model = StereoModel::new(&cfg.model, cfg.seed)?;
    match checkpoint_path(cfg, out) {
        Some(p) => {
            checkpoint::load(&mut model, &p)?;
            Ok((model, true))
        }
        None => Ok((model, false)),
    }
}

/// The resolved configuration, written next to the outputs. `train.seed`
/// is dropped since it always follows the top-level seed.
fn write_config(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mut value = serde_json::to_value(cfg).expect("config serialises");
    if let Some(train) = value.get_mut("train").and_then(|t| t.as_object_mut()) {
        train.remove("seed");
    }
    write_json(&out.join("config.json"), &value)
}

pub fn train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let samples = load_samples(cfg)?;
    let mut model = StereoModel::new(&cfg.model, cfg.seed)?;
    let total = cfg.train.total_epochs();
    let every = (total / 10).max(1);
    let log = sled_train::train(&mut model, &samples, &cfg.train, |r, _| {
        if (r.epoch + 1) % every == 0 || r.epoch + 1 == total {
            println!("epoch {}/{total} lr {} loss {:.6}", r.epoch + 1, r.lr, r.loss);
        }
    })?;
    checkpoint::save(&model, &out.join("checkpoint.bin"))?;
    write_file(&out.join("loss.csv"), log.to_csv())?;
    write_config(cfg, out)
}

fn reports_json(reports: &[MetricReport]) -> serde_json::Value {
    let mut obj = serde_json::Map::new();
    for r in reports {
        let key = serde_json::to_value(r.region).expect("region serialises");
        obj.insert(key.as_str().expect("region is a string").to_string(), serde_json::to_value(r).expect("report serialises"));
    }
    serde_json::Value::Object(obj)
}

/// Reads `NNNN.png` or `NNNN.pfm` for sample `index`.
fn read_prediction(dir: &Path, index: usize) -> Result<DisparityMap> {
    for ext in ["png", "pfm"] {
        let p = dir.join(format!("{index:04}.{ext}"));
        if p.exists() {
            return Ok(read_disparity(&p)?);
        }
    }
    Err(CliError::Data(format!("{}: no prediction {index:04}.png or {index:04}.pfm", dir.display())))
}

pub fn eval(cfg: &RunConfig, out: &Path) -> Result<()> {
    let samples = load_samples(cfg)?;
    let max_disp = cfg.model.resolved().max_disp;
    let per_sample: Vec<SampleTally> = match &cfg.eval.predictions {
        Some(dir) => samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let pred = read_prediction(dir, i)?;
                if (pred.width(), pred.height()) != (s.width(), s.height()) {
                    return Err(CliError::Data(format!(
                        "prediction {i:04} is {}x{}, ground truth is {}x{}",
                        pred.width(),
                        pred.height(),
                        s.width(),
                        s.height()
                    )));
                }
                Ok(SampleTally::collect(pred.values(), &s.gt, s.fg_mask.as_deref(), s.noc_mask.as_deref(), max_disp)?)
            })
            .collect::<Result<_>>()?,
        None => {
            let (model, restored) = restored_model(cfg, out)?;
            if !restored {
                return Err(CliError::Config(
                    "eval needs a checkpoint (set checkpoint, or train into the same --out) or eval.predictions".into(),
                ));
            }
            evaluate(&model, &samples, cfg.eval.batch_norm.into())?.per_sample
        }
    };
    let mut total = SampleTally::default();
    let mut rows = Vec::with_capacity(per_sample.len());
    for (i, t) in per_sample.iter().enumerate() {
        total.merge(t);
        rows.push(json!({ "index": i, "metrics": reports_json(&t.reports()?) }));
    }
    let aggregate = total.reports()?;
    for r in &aggregate {
        let prefix = match r.region {
            sled_train::Region::All => "eval",
            sled_train::Region::Noc => "eval.noc",
        };
        print!("{}", r.to_key_values(prefix));
    }
    write_json(&out.join("metrics.json"), &json!({ "aggregate": reports_json(&aggregate), "samples": rows }))
}

pub fn predict(cfg: &RunConfig, out: &Path) -> Result<()> {
    let samples = load_samples(cfg)?;
    let (model, restored) = restored_model(cfg, out)?;
    if !restored {
        eprintln!("warning: no checkpoint found; predicting with freshly initialised parameters");
    }
    let max_disp = model.config().max_disp;
    let dir = out.join("disp");
    fs::create_dir_all(&dir).map_err(|e| write_err(&dir, e))?;
    let eval = evaluate(&model, &samples, cfg.eval.batch_norm.into())?;
    for (i, (pred, s)) in eval.predictions.iter().zip(&samples).enumerate() {
        let (w, h) = (s.width(), s.height());
        let map = DisparityMap::from_values(w, h, pred.data().to_vec())?;
        write_kitti_disp(&map, &dir.join(format!("{i:04}.png")))?;
        write_rgb8(w, h, &colorize(pred.data(), max_disp), &dir.join(format!("{i:04}_color.png")))?;
    }
    println!("wrote {} predictions to {}", samples.len(), dir.display());
    Ok(())
}

/// Writes the configured samples as image/PFM files plus `manifest.json`.
pub fn synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let samples = load_samples(cfg)?;
    let entries = samples
        .iter()
        .enumerate()
        .map(|(i, s)| Ok(ManifestEntry::Files(write_sample(s, out, &format!("{i:04}"))?)))
        .collect::<Result<Vec<_>>>()?;
    write_manifest(&entries, &out.join("manifest.json"))?;
    println!("wrote {} samples to {}", entries.len(), out.display());
    Ok(())
}

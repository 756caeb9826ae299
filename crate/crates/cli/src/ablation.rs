//! `ablation`: parameter counts per regularizer variant and, optionally,
//! desk-scale training and evaluation of each with a shared seed.

use std::fmt::Write;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use sled_model::{count_parameters, ModelConfig, Regularizer, StereoModel};
use sled_train::{evaluate, MetricReport, Region, TrainConfig};

use crate::config::RunConfig;
use crate::error::{write_err, CliError, Result};
use crate::run::{load_samples, write_file, write_json};

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub variant: Regularizer,
    pub label: String,
    pub parameters: usize,
    /// Training-set metrics of the refined output; absent in params-only mode.
    pub metrics: Option<MetricReport>,
}

/// Compact count for the `Para.` column: `0.29M`, `87.7K`.
pub fn format_params(n: usize) -> String {
    if n >= 100_000 {
        format!("{:.2}M", n as f64 / 1e6)
    } else {
        format!("{:.1}K", n as f64 / 1e3)
    }
}

pub fn render_table(rows: &[Row]) -> String {
    let mut out = String::from("| Model | >1px | >3px | >5px | EPE | D1-all | Para. |\n|---|---|---|---|---|---|---|\n");
    for r in rows {
        let cells = match &r.metrics {
            Some(m) => [
                format!("{:.2}", m.over(1)),
                format!("{:.2}", m.over(3)),
                format!("{:.2}", m.over(5)),
                format!("{:.3}", m.epe),
                m.d1_all.map_or("-".into(), |v| format!("{v:.2}")),
            ],
            None => std::array::from_fn(|_| "-".to_string()),
        };
        writeln!(out, "| {} | {} | {} |", r.label, cells.join(" | "), format_params(r.parameters)).unwrap();
    }
    out
}

fn variant_config(base: &ModelConfig, variant: Regularizer) -> ModelConfig {
    ModelConfig { regularizer: variant, ..base.clone() }
}

/// Rejects variants whose downsampling does not divide the inputs.
fn check_trainable(cfg: &ModelConfig, width: usize, height: usize) -> Result<()> {
    let r = cfg.resolved();
    let div = r.image_divisor();
    let disp_div = 4 * r.regularizer.volume_divisor();
    if width % div != 0 || height % div != 0 || r.max_disp % disp_div != 0 {
        return Err(CliError::Config(format!(
            "variant {} needs images divisible by {div} and max_disp divisible by {disp_div}; got {width}x{height}, max_disp {}",
            r.regularizer, r.max_disp
        )));
    }
    Ok(())
}

fn train_row(cfg: &RunConfig, variant: Regularizer, seed: u64) -> Result<Row> {
    let model_cfg = variant_config(&cfg.model, variant);
    let run = RunConfig { seed, ..cfg.clone() };
    let samples = load_samples(&run)?;
    if let Some(s) = samples.first() {
        check_trainable(&model_cfg, s.width(), s.height())?;
    }
    let mut model = StereoModel::new(&model_cfg, seed)?;
    let train_cfg = TrainConfig { seed, ..cfg.train.clone() };
    sled_train::train(&mut model, &samples, &train_cfg, |_, _| {})?;
    let report = evaluate(&model, &samples, cfg.eval.batch_norm.into())?.total.all.report(Region::All)?;
    Ok(Row { variant, label: variant.label(), parameters: model.num_parameters(), metrics: Some(report) })
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<()> {
    if cfg.ablation.variants.is_empty() {
        return Err(CliError::Config("ablation.variants is empty".into()));
    }
    if !cfg.ablation.train {
        let rows = cfg
            .ablation
            .variants
            .iter()
            .map(|&v| {
                let parameters = count_parameters(&variant_config(&cfg.model, v))?;
                Ok(Row { variant: v, label: v.label(), parameters, metrics: None })
            })
            .collect::<Result<Vec<_>>>()?;
        let table = render_table(&rows);
        print!("{table}");
        write_file(&out.join("table.md"), &table)?;
        return write_json(&out.join("ablation.json"), &json!({ "mode": "parameters", "rows": rows }));
    }

    let seeds = cfg.ablation.seeds.clone().unwrap_or_else(|| vec![cfg.seed]);
    if seeds.is_empty() {
        return Err(CliError::Config("ablation.seeds is empty".into()));
    }
    let tables = out.join("tables");
    fs::create_dir_all(&tables).map_err(|e| write_err(&tables, e))?;
    let mut runs = Vec::new();
    let mut combined = String::new();
    for &seed in &seeds {
        let rows = cfg.ablation.variants.iter().map(|&v| train_row(cfg, v, seed)).collect::<Result<Vec<_>>>()?;
        let table = render_table(&rows);
        println!("seed {seed}\n{table}");
        write_file(&tables.join(format!("seed_{seed}.md")), &table)?;
        writeln!(combined, "### seed {seed}\n\n{table}").unwrap();
        runs.push(json!({ "seed": seed, "rows": rows }));
    }
    write_file(&out.join("table.md"), &combined)?;
    write_json(&out.join("ablation.json"), &json!({ "mode": "trained", "runs": runs }))
}

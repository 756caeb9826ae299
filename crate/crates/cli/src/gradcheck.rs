//! `gradcheck`: every op, then the configured regularizer (and optionally
//! the whole pipeline) against central finite differences.

use std::path::Path;

use serde_json::json;
use sled_model::verify::{check_ops, check_pipeline, check_regularizer};
use sled_model::StereoModel;
use sled_tensor::gradcheck::{GradCheckOptions, GradCheckReport};
use sled_tensor::XorShift64;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::run::write_json;

fn line(name: &str, report: &GradCheckReport, ok: bool) -> String {
    format!(
        "{:<28} max_rel_error={:.3e} checked={} {}",
        name,
        report.max_rel_error,
        report.checked,
        if ok { "PASS" } else { "FAIL" }
    )
}

fn entry(name: &str, report: &GradCheckReport, ok: bool, worst: Option<&str>) -> serde_json::Value {
    json!({
        "name": name,
        "passed": ok,
        "max_rel_error": report.max_rel_error,
        "worst": worst,
        "analytic": report.analytic,
        "numeric": report.numeric,
        "checked": report.checked,
        "refined": report.refined,
        "skipped": report.skipped,
    })
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<()> {
    let g = &cfg.gradcheck;
    if !(g.step > 0.0 && g.step.is_finite()) || !(g.tolerance > 0.0) || g.entries_per_tensor == 0 {
        return Err(CliError::Config("gradcheck needs step > 0, tolerance > 0 and entries_per_tensor > 0".into()));
    }
    let opts = GradCheckOptions {
        step: g.step,
        tolerance: g.tolerance,
        max_entries_per_input: Some(g.entries_per_tensor),
        seed: cfg.seed,
        fault: g.fault.clone().map(|op| (op, g.fault_factor)),
    };
    let mut failed = Vec::new();
    let mut results = Vec::new();

    for c in check_ops(&opts)? {
        let ok = c.report.passed(g.tolerance);
        println!("{}", line(&format!("op {}", c.name), &c.report, ok));
        if !ok {
            failed.push(c.name.to_string());
        }
        results.push(entry(c.name, &c.report, ok, None));
    }

    let model = StereoModel::new(&cfg.model, cfg.seed)?;
    let [n, d, h, w] = g.volume;
    let shape = vec![n, 2 * model.config().feat_channels, d, h, w];
    let volume = XorShift64::new(cfg.seed ^ 0x5eed).uniform_tensor(shape, -1.0, 1.0);
    let check = check_regularizer(&model, &volume, &opts)?;
    let name = format!("{} regularizer", model.config().regularizer);
    let ok = check.report.passed(g.tolerance);
    println!("{} worst={}", line(&name, &check.report, ok), check.worst_name);
    if !ok {
        failed.push(format!("{name} ({})", check.worst_name));
    }
    results.push(entry(&name, &check.report, ok, Some(&check.worst_name)));

    if g.pipeline {
        let mut rng = XorShift64::new(cfg.seed ^ 0x1ea5);
        let left = rng.uniform_tensor(vec![1, 3, 64, 64], -1.0, 1.0);
        let right = rng.uniform_tensor(vec![1, 3, 64, 64], -1.0, 1.0);
        let check = check_pipeline(&model, &left, &right, &opts)?;
        let ok = check.report.passed(g.tolerance);
        println!("{} worst={}", line("pipeline 64x64", &check.report, ok), check.worst_name);
        if !ok {
            failed.push(format!("pipeline ({})", check.worst_name));
        }
        results.push(entry("pipeline", &check.report, ok, Some(&check.worst_name)));
    }

    write_json(&out.join("gradcheck.json"), &json!({ "tolerance": g.tolerance, "step": g.step, "checks": results }))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("gradient mismatch in {}", failed.join(", "))))
    }
}

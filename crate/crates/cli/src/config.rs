//! Run configuration: a JSON file, then `SLED_SEED`, then `--set` flags,
//! each layer overriding the previous one.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sled_model::{Mode, ModelConfig, Regularizer};
use sled_train::TrainConfig;

use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "SLED_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchNormMode {
    /// Running statistics.
    Eval,
    /// Statistics of the evaluated image.
    Train,
}

impl From<BatchNormMode> for Mode {
    fn from(m: BatchNormMode) -> Mode {
        match m {
            BatchNormMode::Eval => Mode::Eval,
            BatchNormMode::Train => Mode::Train,
        }
    }
}

/// Where samples come from: a manifest, or else `count` synthetic
/// stereograms of `width`×`height` generated from the run seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub manifest: Option<PathBuf>,
    pub count: usize,
    pub width: usize,
    pub height: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { manifest: None, count: 4, width: 128, height: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Directory of `NNNN.png` (16-bit KITTI) or `NNNN.pfm` predictions to
    /// score instead of running the network.
    pub predictions: Option<PathBuf>,
    pub batch_norm: BatchNormMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { predictions: None, batch_norm: BatchNormMode::Eval }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    /// Cost volume `[N, D, H, W]` at 1/4 scale; channels follow the model.
    pub volume: [usize; 4],
    pub entries_per_tensor: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Also check the image-to-disparity pipeline on a 64×64 crop.
    pub pipeline: bool,
    /// Test hook: scale the adjoint of this op by `fault_factor`.
    pub fault: Option<String>,
    pub fault_factor: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            volume: [2, 8, 8, 8],
            entries_per_tensor: 3,
            step: 1e-4,
            tolerance: 1e-4,
            pipeline: false,
            fault: None,
            fault_factor: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub variants: Vec<Regularizer>,
    /// Train and evaluate every variant; otherwise count parameters only.
    pub train: bool,
    /// One table per seed; defaults to the run seed.
    pub seeds: Option<Vec<u64>>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig { variants: Regularizer::ALL.to_vec(), train: false, seeds: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seeds initialisation, synthetic data and shuffling.
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    /// Defaults to `<out>/checkpoint.bin` when that file exists.
    pub checkpoint: Option<PathBuf>,
    pub eval: EvalConfig,
    pub gradcheck: GradcheckConfig,
    pub ablation: AblationConfig,
}

/// A parsed configuration plus the dotted keys that were set explicitly.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: RunConfig,
    pub explicit: Vec<String>,
}

/// Sets `path` (dot separated) in `root`, creating objects on the way.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("malformed key {path:?}")));
    }
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("{path}: {} is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("path has at least one part")
}

/// Parses `key=value`; the value is read as JSON, falling back to a string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (key, raw) = s.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects key=value, got {s:?}")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}

fn leaf_keys(value: &Value, prefix: &str, out: &mut Vec<String>) {
    match value.as_object() {
        Some(obj) if !obj.is_empty() => {
            for (k, v) in obj {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                leaf_keys(v, &key, out);
            }
        }
        _ if prefix.is_empty() => {}
        _ => out.push(prefix.to_string()),
    }
}

/// Builds the run configuration. `env_seed` is the raw `SLED_SEED` value.
pub fn load(file: Option<&Path>, env_seed: Option<&str>, overrides: &[String]) -> Result<Loaded> {
    let mut root = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let v: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            if !v.is_object() {
                return Err(CliError::Config(format!("{}: expected a JSON object", p.display())));
            }
            v
        }
        None => Value::Object(Map::new()),
    };
    if let Some(raw) = env_seed {
        let seed: u64 =
            raw.trim().parse().map_err(|_| CliError::Config(format!("{SEED_ENV}={raw:?} is not an unsigned integer")))?;
        set_path(&mut root, "seed", Value::from(seed))?;
    }
    for s in overrides {
        let (key, value) = parse_override(s)?;
        set_path(&mut root, &key, value)?;
    }
    if root.pointer("/train/seed").is_some() {
        return Err(CliError::Config("train.seed is not configurable; set the top-level seed".into()));
    }
    let mut explicit = Vec::new();
    leaf_keys(&root, "", &mut explicit);
    let mut config: RunConfig = serde_json::from_value(root).map_err(|e| CliError::Config(e.to_string()))?;
    config.train.seed = config.seed;
    Ok(Loaded { config, explicit })
}

/// Explicit keys whose top-level section `command` never reads.
pub fn irrelevant_keys(explicit: &[String], relevant: &[&str]) -> Vec<String> {
    explicit
        .iter()
        .filter(|k| !relevant.contains(&k.split('.').next().unwrap_or_default()))
        .cloned()
        .collect()
}

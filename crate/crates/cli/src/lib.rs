//! Command implementations behind the `sled` binary.

pub mod ablation;
pub mod colormap;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod run;

use std::path::PathBuf;

pub use config::{load, Loaded, RunConfig};
pub use error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Gradcheck,
    Train,
    Eval,
    Predict,
    Ablation,
    Synth,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gradcheck => "gradcheck",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Predict => "predict",
            Command::Ablation => "ablation",
            Command::Synth => "synth",
        }
    }

    /// Top-level config sections the command reads.
    pub fn sections(self) -> &'static [&'static str] {
        match self {
            Command::Gradcheck => &["seed", "model", "gradcheck"],
            Command::Train => &["seed", "model", "train", "data"],
            Command::Eval => &["seed", "model", "data", "checkpoint", "eval"],
            Command::Predict => &["seed", "model", "data", "checkpoint", "eval"],
            Command::Ablation => &["seed", "model", "train", "data", "eval", "ablation"],
            Command::Synth => &["seed", "model", "data"],
        }
    }
}

/// Runs `command` with outputs under `out`, returning warnings about
/// configuration keys the command ignores.
pub fn execute(command: Command, loaded: &Loaded, out: &PathBuf) -> Result<Vec<String>> {
    let warnings: Vec<String> = config::irrelevant_keys(&loaded.explicit, command.sections())
        .into_iter()
        .map(|k| format!("{k} has no effect on {}", command.name()))
        .collect();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    std::fs::create_dir_all(out).map_err(|e| error::write_err(out, e))?;
    let cfg = &loaded.config;
    match command {
        Command::Gradcheck => gradcheck::run(cfg, out)?,
        Command::Train => run::train(cfg, out)?,
        Command::Eval => run::eval(cfg, out)?,
        Command::Predict => run::predict(cfg, out)?,
        Command::Ablation => ablation::run(cfg, out)?,
        Command::Synth => run::synth(cfg, out)?,
    }
    Ok(warnings)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use sled_cli::config::SEED_ENV;
use sled_cli::{execute, load, Command};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Gradcheck,
    Train,
    Eval,
    Predict,
    Ablation,
    Synth,
}

/// Stereo disparity networks: training, evaluation, prediction,
/// gradient verification, ablation tables and synthetic data.
#[derive(Debug, Parser)]
#[command(name = "sled", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// JSON run configuration; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a dotted config key, e.g. `--set train.batch_size=4`.
    /// Values are parsed as JSON, falling back to a plain string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match args.command {
        Cmd::Gradcheck => Command::Gradcheck,
        Cmd::Train => Command::Train,
        Cmd::Eval => Command::Eval,
        Cmd::Predict => Command::Predict,
        Cmd::Ablation => Command::Ablation,
        Cmd::Synth => Command::Synth,
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = load(args.config.as_deref(), env_seed.as_deref(), &args.set)
        .and_then(|loaded| execute(command, &loaded, &args.out));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

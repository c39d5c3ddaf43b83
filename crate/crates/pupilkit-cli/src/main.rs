//! `pupilkit` — train, run and evaluate the pupil-detection networks.
//!
//! Subcommands: `train`, `detect`, `eval`, `synth`, `verify`. Every value
//! flag can also come from a TOML file passed with `--config-file` whose
//! keys mirror the long flag names (`seed = 7`, `noise-sigma = 4.0`);
//! command-line flags win. All commands exit 0 on success and 1 on any
//! error, and are deterministic for fixed flags, seeds and inputs.

mod commands;
mod file_config;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "pupilkit", version, about = "CPU pupil detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network on labeled datasets and write a PNETv1 model file.
    Train(commands::TrainArgs),
    /// Run pupil detection over images and write per-frame predictions.
    Detect(commands::DetectArgs),
    /// Evaluate detection rates, optionally with cross-validation.
    Eval(commands::EvalArgs),
    /// Generate a labeled synthetic eye-image dataset.
    Synth(commands::SynthArgs),
    /// Self-check: gradients, scan-oracle equivalence, refinement laws.
    Verify(commands::VerifyArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => commands::train(args),
        Command::Detect(args) => commands::detect(args),
        Command::Eval(args) => commands::eval(args),
        Command::Synth(args) => commands::synth(args),
        Command::Verify(args) => commands::verify(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

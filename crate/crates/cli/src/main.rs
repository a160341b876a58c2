//! `privmob` — train and evaluate privacy-preserving mobility models.
//!
//! Subcommands: `synth` generates data, `train` fits a model, `predict`
//! runs one, `evaluate` scores one against baselines, and `sweep` maps the
//! privacy/utility frontier across a grid of weight settings.
//!
//! Exit codes: 0 success; 2 invalid configuration or input; 3 numerical
//! failure (non-finite losses or probabilities); 4 incompatible artifacts;
//! 1 other I/O errors.

mod artifacts;
mod commands;
mod config;
mod errors;
mod manifest;
mod plot;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{evaluate, predict, sweep, synth, train};

#[derive(Parser)]
#[command(
    name = "privmob",
    version,
    about = "Train and evaluate privacy-preserving mobility models",
    long_about = "Learns mobility representations that stay useful for next-location \
                  prediction while resisting user re-identification, and maps the \
                  trade-off between the two."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic mobility dataset.
    Synth(synth::SynthArgs),
    /// Prepare data, train a model, and write its artifacts.
    Train(train::TrainArgs),
    /// Run a trained model over records and write its outputs.
    Predict(predict::PredictArgs),
    /// Score a trained model on held-out records.
    Evaluate(evaluate::EvaluateArgs),
    /// Train a grid of weight settings and extract the frontier.
    Sweep(sweep::SweepArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => synth::run(args),
        Command::Train(args) => train::run(args),
        Command::Predict(args) => predict::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Sweep(args) => sweep::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code())
        }
    }
}

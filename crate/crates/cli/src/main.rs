mod commands;
mod config;
mod error;
mod extract;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

/// Train and evaluate a multi-scale, multi-task quality model on
/// precomputed image and text features.
#[derive(Debug, Parser)]
#[command(name = "amff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a planted synthetic dataset
    Synth(commands::SynthArgs),
    /// Encode PGM/PPM images and prompts into feature records
    Extract(commands::ExtractArgs),
    /// Train on the training portion of a split and save checkpoints
    Train(commands::TrainCmd),
    /// Evaluate checkpoints on their held-out split
    Eval(commands::EvalArgs),
    /// Print the three scores for every sample as JSON lines
    Predict(commands::PredictArgs),
    /// Compare structural and similarity variants on identical splits
    Ablate(commands::AblateArgs),
    /// Check every analytic gradient against central differences
    Gradcheck(commands::GradcheckArgs),
}

fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("AMFF_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::invalid(format!("AMFF_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::invalid(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let line = rendered.lines().next().unwrap_or_default();
            eprintln!("error[E_USAGE]: {}", line.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}

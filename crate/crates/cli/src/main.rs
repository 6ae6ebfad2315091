//! `ors`: synthesize data, train duration models, schedule weekly lists and
//! compare scheduling methods.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Ctx};
use config::{FileConfig, Settings};

#[derive(Debug, Parser)]
#[command(name = "ors", version, about = "Operating-room scheduling with predicted surgery durations")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Solver time budget per schedule.
    #[arg(long, global = true, value_name = "SECONDS")]
    time_limit: Option<f64>,
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic history and one weekly waiting list.
    Synth(commands::SynthArgs),
    /// Derive durations and clean a records file.
    Preprocess(commands::PreprocessArgs),
    /// Train a duration model and the group-mean baselines.
    Train(commands::TrainArgs),
    /// Schedule one week with one duration source.
    Schedule(commands::ScheduleArgs),
    /// Replay schedules on actual durations and write the comparison report.
    Evaluate(commands::EvaluateArgs),
    /// Synthesize, train, schedule every method and evaluate, per hospital.
    Pipeline(commands::PipelineArgs),
}

fn settings(cli: &Cli) -> Result<Settings, CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(CliError::Usage)?,
        None => FileConfig::default(),
    };
    let mut s = Settings::from_file(file).map_err(CliError::Usage)?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(threads) = cli.threads {
        s.threads = threads;
    }
    if let Some(t) = cli.time_limit {
        s.time_limit = t;
    }
    s.validate().map_err(CliError::Usage)?;
    Ok(s)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        settings: settings(&cli)?,
        out: cli.out,
    };
    match cli.command {
        Command::Synth(a) => commands::synth(ctx, a),
        Command::Preprocess(a) => commands::preprocess(ctx, a),
        Command::Train(a) => commands::train(ctx, a),
        Command::Schedule(a) => commands::schedule(ctx, a),
        Command::Evaluate(a) => commands::evaluate(ctx, a),
        Command::Pipeline(a) => commands::pipeline(ctx, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

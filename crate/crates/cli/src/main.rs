//! `tnn` command-line interface.

mod commands;
mod config;
mod data;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "tnn",
    version,
    about = "Train, ternarize, run and cost ternary neural networks"
)]
struct Cli {
    /// Rayon worker threads. Defaults to $TNN_WORKERS, else all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Flat `key = value` settings file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a real-valued teacher MLP with stochastic ternary firing.
    Train(commands::train::TrainArgs),
    /// Convert a teacher into a ternary student.
    Ternarize(commands::ternarize::TernarizeArgs),
    /// Classify a dataset split with a ternary model.
    Eval(commands::eval::EvalArgs),
    /// Measure inference throughput of a ternary model.
    Bench(commands::bench::BenchArgs),
    /// Estimate hardware pipeline throughput and latency.
    Hwmodel(commands::hwmodel::HwmodelArgs),
}

fn workers(flag: Option<usize>) -> Result<usize, CliError> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("TNN_WORKERS") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("TNN_WORKERS={v:?} is not a worker count")))?,
            Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        },
    };
    if n == 0 {
        return Err(CliError::usage("worker count must be at least 1"));
    }
    Ok(n)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let n = workers(cli.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {n} workers: {e}")))?;
    let settings = config::Settings::load(cli.config.as_deref())?;
    pool.install(|| match cli.command {
        Command::Train(a) => commands::train::run(a, &settings, n),
        Command::Ternarize(a) => commands::ternarize::run(a, &settings, n),
        Command::Eval(a) => commands::eval::run(a, &settings, n),
        Command::Bench(a) => commands::bench::run(a, &settings, n),
        Command::Hwmodel(a) => commands::hwmodel::run(a, &settings),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

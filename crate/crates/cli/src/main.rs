//! `biphoton`: Fisher information tables, outcome probabilities and seeded
//! Monte Carlo studies for displacement sensing with position-correlated
//! photon pairs.

mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Command;
use config::{Params, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "biphoton", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    #[command(flatten)]
    params: Params,
}

/// Every subcommand writes `# key = value` metadata, then a CSV header and rows.
/// Record columns: experiment,sigma,epsilon,d,pixels,nu,seed,statistic,value,std_error.
#[derive(Debug, Subcommand)]
enum Sub {
    /// Closed-form, discrete and quantum Fisher information for one model.
    /// Columns: record columns.
    Fisher,
    /// Split (and, with --pixels, N-pixel) outcome tables.
    /// Columns: detector,outcome,probability,derivative.
    Probabilities,
    /// Raw photon pairs (--nu of them, default 1000).
    /// Columns: index,x1,x2.
    Sample,
    /// Split-detector net signal per event (--nu, default 10000; d default 0.1σ).
    /// Columns: event,step,net_signal.
    RandomWalk,
    /// Pixel-count sweep of the discrete Fisher information over ε ∈ [0.01σ, σ].
    /// Columns: record columns.
    NpixelSweep,
    /// Events needed to reach --snr (default 1). Without --epsilon/--d, sweeps
    /// the ε/σ family over a displacement grid.
    /// Columns: record columns.
    Crossover,
    /// Monte Carlo resolution versus event count with a log-log slope fit.
    /// Columns: record columns.
    Scaling,
    /// Weighted average of the two photons' marginal estimates.
    /// Columns: record columns.
    AppendixA,
    /// Quantum versus classical Fisher information.
    /// Columns: record columns.
    QfiCheck,
}

impl Sub {
    fn command(&self) -> Command {
        match self {
            Sub::Fisher => Command::Fisher,
            Sub::Probabilities => Command::Probabilities,
            Sub::Sample => Command::Sample,
            Sub::RandomWalk => Command::RandomWalk,
            Sub::NpixelSweep => Command::NpixelSweep,
            Sub::Crossover => Command::Crossover,
            Sub::Scaling => Command::Scaling,
            Sub::AppendixA => Command::AppendixA,
            Sub::QfiCheck => Command::QfiCheck,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cmd = cli.command.command();
    let result =
        RunConfig::resolve(cmd.name(), cli.params).and_then(|cfg| commands::dispatch(cmd, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("biphoton: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

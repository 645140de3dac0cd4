//! Command-line front-end: configuration handling, subcommands and
//! artifact writing.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod params;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_crlb, cmd_estimate, cmd_fit, cmd_msd, cmd_simulate, cmd_trace_replay, RunOptions,
};
pub use config::Config;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "uavhoc", version, about = "Handover-count simulation, fitting, speed estimation and mobility-state detection for UAVs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Flat key=value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Base seed for all random draws (overrides `seed=`).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Monte Carlo runs per configuration (overrides `runs=`).
    #[arg(long, global = true, value_name = "N")]
    pub runs: Option<usize>,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo campaign and write handover-count samples and PMFs.
    Simulate,
    /// Fit PMFs and power-law surfaces to a `simulate` output directory.
    Fit,
    /// Tabulate the speed information bound and estimator moments.
    Crlb,
    /// Estimate speeds and mobility states from handover counts.
    Estimate,
    /// Mobility-state detection probabilities and windowed estimation.
    Msd,
    /// Replay a recorded RSRP trace through the handover state machine.
    TraceReplay,
}

fn dispatch(command: Command, opts: &RunOptions) -> CliResult<()> {
    match command {
        Command::Simulate => cmd_simulate(opts),
        Command::Fit => cmd_fit(opts),
        Command::Crlb => cmd_crlb(opts),
        Command::Estimate => cmd_estimate(opts),
        Command::Msd => cmd_msd(opts),
        Command::TraceReplay => cmd_trace_replay(opts),
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let opts = RunOptions {
        config,
        seed: cli.seed,
        runs: cli.runs,
        out: cli.out.clone(),
    };
    match cli.threads {
        None => dispatch(cli.command, &opts),
        Some(0) => Err(error::config("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| error::runtime(format!("thread pool: {e}")))?
            .install(|| dispatch(cli.command, &opts)),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("uavhoc: {e}");
            e.exit_code()
        }
    }
}

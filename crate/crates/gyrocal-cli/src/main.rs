//! `gyrocal`: simulate, ingest, train, evaluate and compare gyroscope
//! bias calibration experiments driven by a JSON spec.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 when
//! an internal invariant is violated.

mod commands;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::spec::ExperimentSpec;

#[derive(Parser)]
#[command(
    name = "gyrocal",
    version,
    about = "Gyroscope rapid calibration toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a virtual stationary dataset on disk
    Simulate(RunArgs),
    /// Validate a recorded dataset and print a summary
    Ingest(RunArgs),
    /// Train one bias regressor per window length
    Train(RunArgs),
    /// Evaluate checkpoints against the model-based baseline
    Eval(RunArgs),
    /// Print the comparison table from saved evaluation reports
    Compare(RunArgs),
}

/// Flags shared by all subcommands; each overrides the matching spec field.
#[derive(Args)]
struct RunArgs {
    /// Experiment spec (JSON)
    #[arg(long, value_name = "PATH")]
    spec: PathBuf,
    /// Master seed override
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory override
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Window length override in seconds; repeat for several windows
    #[arg(long = "window-s", value_name = "SECONDS")]
    window_s: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = if matches!(err, gyrocal::Error::Internal(_)) {
                2
            } else {
                1
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> gyrocal::Result<()> {
    let (args, command): (&RunArgs, fn(&ExperimentSpec) -> gyrocal::Result<()>) = match &cli.command
    {
        Command::Simulate(args) => (args, commands::cmd_simulate),
        Command::Ingest(args) => (args, commands::cmd_ingest),
        Command::Train(args) => (args, commands::cmd_train),
        Command::Eval(args) => (args, commands::cmd_eval),
        Command::Compare(args) => (args, commands::cmd_compare),
    };
    let spec =
        ExperimentSpec::load(&args.spec)?.resolve(args.seed, args.out.clone(), &args.window_s)?;
    command(&spec)
}

//! `tse` — a file-based pipeline for synthetic intersection sensing:
//! simulate ground truth, emulate heterogeneous sensors, derive interval
//! series, score each sensing chain, fit travel-time models, and emit tidy
//! plot data. Every command reads and writes one run directory and keeps a
//! digest manifest, so identical invocations produce identical artifacts.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tse_core::error::Error;

#[derive(Parser)]
#[command(
    name = "tse",
    version,
    about = "Traffic state estimation pipeline over one run directory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario configuration JSON; the built-in scenario when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the scenario seed.
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,

    /// Run directory that receives and provides artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "run")]
    out: PathBuf,

    /// Trailing smoothing window: the current interval plus k predecessors.
    #[arg(long, global = true, value_name = "K", default_value_t = 10)]
    k: usize,

    /// Probe reporting rate override; the scenario value (0.05 in the
    /// built-in scenario) when omitted.
    #[arg(long, global = true, value_name = "RATE")]
    probe_rate: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground truth: vehicle traces, loop records, phase logs.
    Simulate,
    /// Run the sensor emulators and derive every interval series.
    Derive {
        /// Group traversals by entry interval instead of exit interval.
        #[arg(long)]
        tt_by_entry: bool,
    },
    /// Score each sensing chain against ground truth into report.csv.
    Assess,
    /// Fit and evaluate travel-time models for one route.
    Estimate {
        /// Route to estimate.
        #[arg(long, default_value_t = 3)]
        route: u8,
    },
    /// Emit tidy per-figure CSV files for external plotting.
    Plotdata,
}

/// Map pipeline errors onto the documented exit codes: 2 for malformed or
/// schema-violating files, 3 for filesystem failures (unwritable run
/// directory), 4 for a missing upstream artifact, 1 otherwise.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::MissingArtifact(_) => 4,
        Error::Parse { .. } | Error::Schema { .. } | Error::Csv(_) => 2,
        Error::Io(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.as_path();
    let result = match cli.command {
        Command::Simulate => commands::simulate(cli.config.as_deref(), cli.seed, out),
        Command::Derive { tt_by_entry } => {
            commands::derive(out, cli.k, cli.probe_rate, tt_by_entry)
        }
        Command::Assess => commands::assess(out),
        Command::Estimate { route } => commands::estimate(out, route, cli.k, cli.probe_rate),
        Command::Plotdata => commands::plotdata(out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

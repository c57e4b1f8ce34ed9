//! `pilotwave`: command-line front end for the pilot-wave trajectory
//! library. Subcommands share one scenario-file format; see the workspace
//! README and `docs/scenario.schema.json` for the field reference.
//!
//! Exit codes: 0 success, 1 a scientific check failed (tachyonic points,
//! deviation above tolerance, KS band exceeded), 2 configuration error,
//! 3 numerical failure.

mod commands;
mod ensemble;
mod ks;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pilotwave_core::Error;

use crate::commands::Overrides;
use crate::scenario::{FormatSpec, Scenario};

#[derive(Parser)]
#[command(
    name = "pilotwave",
    version,
    about = "Trajectories, mass maps, and consistency checks for a \
             variable-mass pilot-wave model in 1+1 dimensions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the scenario's particles and write trajectories plus a
    /// summary.
    Run(CommonArgs),
    /// Sweep a spacetime grid for tachyonic points of the squared-mass map.
    ScanTachyon(CommonArgs),
    /// Compare the mass-field run against the conformally rescaled
    /// geodesic.
    CompareConformal(CommonArgs),
    /// Measure the decay of the relativistic-to-first-order deviation as
    /// the light speed grows.
    CompareNonrel(CommonArgs),
    /// Draw positions from the initial density, push them along the
    /// guidance flow, and KS-test the result.
    Ensemble(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's outputs.path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trajectory format; defaults to the scenario's outputs.format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Ensemble seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override for compare-conformal.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            format: self.format.map(|f| match f {
                FormatArg::Csv => FormatSpec::Csv,
                FormatArg::Json => FormatSpec::Json,
            }),
            seed: self.seed,
            tol: self.tol,
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Init(_) => 2,
        _ => 3,
    }
}

/// Caps rayon's worker count when PILOTWAVE_THREADS is set.
fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("PILOTWAVE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("PILOTWAVE_THREADS: expected a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err("PILOTWAVE_THREADS: must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("PILOTWAVE_THREADS: cannot build thread pool: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("pilotwave: {msg}");
        return ExitCode::from(2);
    }
    let args = match &cli.command {
        Command::Run(a)
        | Command::ScanTachyon(a)
        | Command::CompareConformal(a)
        | Command::CompareNonrel(a)
        | Command::Ensemble(a) => a,
    };
    let scenario = match Scenario::load(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("pilotwave: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    let ov = args.overrides();
    let outcome = match &cli.command {
        Command::Run(_) => commands::cmd_run(&scenario, &ov),
        Command::ScanTachyon(_) => commands::cmd_scan_tachyon(&scenario, &ov),
        Command::CompareConformal(_) => commands::cmd_compare_conformal(&scenario, &ov),
        Command::CompareNonrel(_) => commands::cmd_compare_nonrel(&scenario, &ov),
        Command::Ensemble(_) => commands::cmd_ensemble(&scenario, &ov),
    };
    match outcome {
        Ok(code) => ExitCode::from(u8::try_from(code).unwrap_or(3)),
        Err(e) => {
            eprintln!("pilotwave: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

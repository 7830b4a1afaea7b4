use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use twinswarm::Mode;
use twinswarm_cli::{load, run_sweep, CliError, Overrides};

/// Swarm localization simulator: single runs and Monte Carlo sweeps.
#[derive(Debug, Parser)]
#[command(name = "twinswarm", version)]
struct Args {
    /// Scenario/sweep TOML file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated modes (P2P, DT1, DT2, RW1, RW2).
    #[arg(long, value_delimiter = ',')]
    mode: Option<Vec<Mode>>,
    /// Comma-separated agent counts.
    #[arg(long, value_delimiter = ',')]
    agents: Option<Vec<usize>>,
    /// Monte Carlo runs per (mode, agents) cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Seed base; run i uses a seed mixed from (seed, i).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the PER grid as CSV (default: <out>/per_field.csv).
    #[arg(long, num_args = 0..=1, value_name = "PATH")]
    export_per_field: Option<Option<PathBuf>>,
    #[arg(long)]
    max_rounds: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn run(args: Args) -> Result<(), CliError> {
    if args.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let overrides = Overrides {
        modes: args.mode,
        agents: args.agents,
        runs: args.runs,
        seed: args.seed,
        out: args.out,
        max_rounds: args.max_rounds,
    };
    let plan = load(args.config.as_deref(), &overrides)?;
    let per_field = args.export_per_field.as_ref().map(|p| p.as_deref());
    run_sweep(&plan, args.jobs, per_field)?;
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("twinswarm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

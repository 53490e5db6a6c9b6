//! `rydsim` campaign runner.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "rydsim", version, about = "Rydberg array simulation campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}


#[derive(Subcommand)]
enum Command {
    /// Sweep, sample and analyze correlations and perfect-order probability.
    Sweep(Args),
    /// Order parameters over a (R_b/a, Δ/Ω) raster of ground states.
    PhaseDiagram(Args),
    /// Correlation growth for several sweep rates and the ν collapse.
    Kz(Args),
    /// Conditional densities after a quench and Bloch-vector fits.
    Quench(Args),
    /// Rearrangement plans and filling statistics.
    Rearrange(Args),
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides the config.
    #[arg(long)]
    workers: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, args) = match &cli.command {
        Command::Sweep(a) => ("sweep", a),
        Command::PhaseDiagram(a) => ("phase-diagram", a),
        Command::Kz(a) => ("kz", a),
        Command::Quench(a) => ("quench", a),
        Command::Rearrange(a) => ("rearrange", a),
    };
    let loaded = config::load(&args.config)?;
    let cfg = &loaded.config;
    let seed = args.seed.unwrap_or(cfg.shots.seed);
    let workers = args.workers.or(cfg.workers).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let out = output::Output::new(&args.out, name, &loaded.hash, seed)?;
    pool.install(|| match cli.command {
        Command::Sweep(_) => commands::sweep::run(cfg, seed, &out),
        Command::PhaseDiagram(_) => commands::phase_diagram::run(cfg, &out),
        Command::Kz(_) => commands::kz::run(cfg, seed, &out),
        Command::Quench(_) => commands::quench::run(cfg, &out),
        Command::Rearrange(_) => commands::rearrange::run(cfg, seed, &out),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `tdg`: space-time Trefftz DG runs from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{MeshKind, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "tdg", version, about = "Space-time Trefftz DG solver for the 1D acoustic wave equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Polynomial degree.
    #[arg(long, global = true)]
    p: Option<usize>,
    #[arg(long, global = true, value_enum)]
    mesh: Option<MeshKind>,
    /// Tent slope factor in (0, 1).
    #[arg(long, global = true)]
    zeta: Option<f64>,
    /// Refinement levels for `converge`.
    #[arg(long, global = true)]
    levels: Option<u32>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate and write the mesh.
    Mesh,
    /// Solve and write the solution and a report.
    Solve,
    /// Run the randomised property suite.
    Verify,
    /// Run a refinement study against the exact solution.
    Converge,
    /// Print the continuity and stability constants of the mesh.
    Constants,
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply(&Overrides {
        out: cli.out,
        p: cli.p,
        mesh: cli.mesh,
        zeta: cli.zeta,
        levels: cli.levels,
        seed: cli.seed,
    })?;
    config.validate()?;
    log::debug!("config: {config:?}");
    match cli.command {
        Command::Mesh => commands::mesh(&config)?,
        Command::Solve => commands::solve(&config)?,
        Command::Verify => return commands::verify(&config),
        Command::Converge => commands::converge(&config)?,
        Command::Constants => commands::constants(&config)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

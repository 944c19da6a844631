mod commands;
mod config;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::output::Outputs;

/// Runs the conformal integrator experiments and writes CSV, JSON or SVG
/// results into the output directory.
#[derive(Parser)]
#[command(name = "confint", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment config; missing fields take their defaults.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if needed.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory of the proposed integrator with energies and error against the reference.
    Simulate(Common),
    /// Weighted hull volumes of an evolving point cloud.
    Cloud(Common),
    /// Energy drift and error of the ell = 0 and ell = 2 integrators side by side.
    Compare(Common),
    /// Backward error analysis of one step at the initial state.
    Bea(Common),
    /// SVG line chart of a CSV file.
    Plot {
        #[command(flatten)]
        common: Common,
        /// CSV file to plot.
        #[arg(long)]
        input: PathBuf,
    },
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("CONFINT_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("CONFINT_THREADS={v:?} is not a thread count"))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    configure_threads()?;
    let (common, artifacts) = match &cli.command {
        Command::Simulate(c) => (c, commands::simulate(&ExperimentConfig::load(&c.config)?)?),
        Command::Cloud(c) => (c, commands::cloud(&ExperimentConfig::load(&c.config)?)?),
        Command::Compare(c) => (c, commands::compare(&ExperimentConfig::load(&c.config)?)?),
        Command::Bea(c) => (c, commands::bea(&ExperimentConfig::load(&c.config)?)?),
        Command::Plot { common, input } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            let cols = plot::read_csv(input)?;
            let provenance = format!("confint plot input={} config={}", input.display(), cfg.canonical());
            let svg = plot::render(&cols, &cfg.plot, &provenance)?;
            let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
            (common, vec![(format!("{stem}.svg"), svg.into_bytes())])
        }
    };
    let mut out = Outputs::new(&common.out)?;
    for (name, bytes) in &artifacts {
        out.stage(name, bytes)?;
    }
    out.commit()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

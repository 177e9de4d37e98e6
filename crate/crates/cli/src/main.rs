#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

mod commands;
mod config;
mod output;

use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] rnm_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Seeded experiments for random normal matrices.
#[derive(Debug, Parser)]
#[command(name = "rnm", version)]
struct Cli {
    /// Configuration file (TOML, dotted sections).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the configuration.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; overrides `threads`.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Also write a gnuplot script next to every CSV.
    #[arg(long, global = true)]
    gnuplot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Exact combinatorial identities and Gaussian pair integrals.
    Identities,
    /// Diagonal expansion and off-diagonal decay of the weighted kernel.
    Kernel,
    /// Draw eigenvalue configurations.
    Sample,
    /// Fluctuation report for a bulk-supported statistic.
    Clt,
    /// Exact finite-n cumulants from the trace formula.
    Cumulants,
    /// Berezin kernel identities, wavefunction and harmonic measure.
    Berezin,
    /// Microscopic scaling limit at an anchor.
    Scaling,
    /// Boundary fluctuations for Hele-Shaw potentials.
    Boundary,
}

impl Command {
    fn run(self, cfg: &ExperimentConfig) -> Result<output::Report, CliError> {
        match self {
            Command::Identities => commands::identities(),
            Command::Kernel => commands::kernel(cfg),
            Command::Sample => commands::sample(cfg),
            Command::Clt => commands::clt(cfg),
            Command::Cumulants => commands::cumulants(cfg),
            Command::Berezin => commands::berezin(cfg),
            Command::Scaling => commands::scaling(cfg),
            Command::Boundary => commands::boundary(cfg),
        }
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let cfg = resolve(cli)?;
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))?;
    }
    let report = cli.command.run(&cfg)?;
    let echo = json!({ "input": cfg, "resolved": commands::resolved_summary(&cfg, cli.command_needs_ensemble()) });
    let files = output::write_report(&report, &echo, &cfg.output.dir, cli.gnuplot)?;
    for line in &report.console {
        println!("{line}");
    }
    for c in &report.checks {
        println!(
            "check {}: {:.4e} (prediction {:.4e}, tolerance {:.4e}) {}",
            c.name,
            c.value,
            c.prediction,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(report.passed())
}

impl Cli {
    fn command_needs_ensemble(&self) -> bool {
        !matches!(self.command, Command::Identities)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

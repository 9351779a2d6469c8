//! `gilbertlab`: runs the percolation experiments and writes machine-readable
//! outputs plus a `manifest.json` that pins the resolved configuration.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::CliError;

#[derive(Parser, Debug)]
#[command(name = "gilbertlab", version, about = "Continuum percolation experiments on the Gilbert disc graph")]
struct Cli {
    /// Master seed; overrides `masterSeed` in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true, env = "GILBERTLAB_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArg {
    /// JSON config file (or a previous run's manifest.json). Flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a marked Poisson configuration on B_n with its graph.
    Sample(commands::SampleArgs),
    /// Sweep crossing probabilities over an (n, p) grid.
    Theta(commands::ThetaArgs),
    /// Estimate pivotal integrals, optionally with a per-location ratio profile.
    Pivotal(commands::PivotalArgs),
    /// Compare finite-difference derivatives with pivotal integrals.
    RussoCheck(commands::RussoArgs),
    /// Run the site-in-bond coupling and audit domination.
    Couple(commands::CoupleArgs),
    /// Exact probabilities on a small fixture.
    Oracle(commands::OracleArgs),
    /// Estimate the critical intensity from box crossings.
    Critical(commands::CriticalArgs),
    /// Site and bond half-points on common windows.
    Gap(commands::GapArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let workers = cli.workers;
    let result = gilbertlab_core::exec::with_workers(workers, move || run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = commands::Context {
        seed: cli.seed,
        out: cli.out,
    };
    match cli.command {
        Command::Sample(a) => commands::sample(&ctx, a),
        Command::Theta(a) => commands::theta(&ctx, a),
        Command::Pivotal(a) => commands::pivotal(&ctx, a),
        Command::RussoCheck(a) => commands::russo_check(&ctx, a),
        Command::Couple(a) => commands::couple(&ctx, a),
        Command::Oracle(a) => commands::oracle(&ctx, a),
        Command::Critical(a) => commands::critical(&ctx, a),
        Command::Gap(a) => commands::gap(&ctx, a),
    }
}

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod commands;
mod input;

/// Numerical laboratory for SDEs with divergence-free distributional drift.
#[derive(Parser, Debug)]
#[command(name = "supersde", version, about)]
struct Cli {
    /// Seed for simulations; overrides experiment and config seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "supersde-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct DriftArgs {
    /// Drift spec (JSON).
    #[arg(long)]
    pub drift: PathBuf,
    /// Mollification level; the raw grid drift when absent.
    #[arg(long)]
    pub n: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the parameter condition report of a drift spec as JSON.
    DriftReport {
        #[arg(long)]
        drift: PathBuf,
    },
    /// Littlewood–Paley block norms and the Besov norm of a field or drift.
    BesovNorm(commands::BesovArgs),
    /// `‖b − b^n‖` in a weaker Besov space across levels, with the fitted rate.
    MollifyScan(commands::MollifyArgs),
    /// Paraproduct form of `b·∇u` and its bound ratio across levels.
    ParaproductCheck(commands::ParaproductArgs),
    /// Euler–Maruyama ensemble for the mollified drift.
    Simulate(commands::SimulateArgs),
    /// Kolmogorov backward solve with SSL1 slices and an energy table.
    Kbe(commands::KbeArgs),
    /// Weak-rate experiment (or η sweep when the config lists `etas`).
    Rate(commands::ExperimentArgs),
    /// Hitting experiment near the singular set, or the dimension gate.
    Singularity(commands::SingularityArgs),
    /// Energy-solution diagnostics at one level.
    Suite(commands::ExperimentArgs),
    /// Run every experiment of a configuration and write a manifest.
    Run(commands::RunArgs),
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    supersde::par::set_threads(cli.threads)?;
    let ctx = commands::Context { seed: cli.seed, out: cli.out };
    match cli.command {
        Command::DriftReport { drift } => commands::drift_report(&ctx, &drift),
        Command::BesovNorm(a) => commands::besov_norm(&ctx, &a),
        Command::MollifyScan(a) => commands::mollify_scan(&ctx, &a),
        Command::ParaproductCheck(a) => commands::paraproduct_check(&ctx, &a),
        Command::Simulate(a) => commands::simulate(&ctx, &a),
        Command::Kbe(a) => commands::kbe(&ctx, &a),
        Command::Rate(a) => commands::rate(&ctx, &a),
        Command::Singularity(a) => commands::singularity(&ctx, &a),
        Command::Suite(a) => commands::suite(&ctx, &a),
        Command::Run(a) => commands::run(&ctx, &a),
    }
}

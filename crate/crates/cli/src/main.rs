mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

/// Differentiable Monte Carlo renderer and inverse-rendering toolkit.
#[derive(Parser)]
#[command(name = "radiprior", version, about)]
struct Cli {
    /// Root RNG seed (overrides config files).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory or file (overrides config files).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; 1 guarantees bit-deterministic results, 0 uses
    /// all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Dotted-path config overrides, e.g. --set train.spp=8
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Path-trace a multi-view ground-truth dataset.
    GenDataset(commands::gen_dataset::Args),
    /// Run an inverse-rendering optimization.
    Train(commands::train::Args),
    /// Render one view with a chosen estimator.
    Render(commands::render::Args),
    /// Cube-scene path-length and constant-cost benchmark.
    BenchCube(commands::bench_cube::Args),
    /// Per-pixel parameter-gradient heatmaps (tape vs finite differences).
    GradientMap(commands::gradient_map::Args),
    /// PSNR and MAPE between two PFM images.
    Metrics(commands::metrics::Args),
}

/// Stable exit codes: 0 success, 2 config error, 3 divergence, 4 I/O.
fn exit_code(err: &anyhow::Error) -> i32 {
    if let Some(core) = err.downcast_ref::<radiprior::Error>() {
        match core {
            radiprior::Error::Diverged { .. } | radiprior::Error::NonFiniteLoss { .. } => 3,
            radiprior::Error::Io { .. } => 4,
            radiprior::Error::Scene(_)
            | radiprior::Error::Config(_)
            | radiprior::Error::Format { .. } => 2,
        }
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        4
    } else {
        2
    }
}

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("RADIPRIOR_LOG", "error"),
    )
    .init();
    let cli = Cli::parse();
    let globals = config::Globals {
        seed: cli.seed,
        out: cli.out,
        threads: cli.threads,
        overrides: cli.set,
    };
    let result = match cli.command {
        Command::GenDataset(args) => commands::gen_dataset::run(args, &globals),
        Command::Train(args) => commands::train::run(args, &globals),
        Command::Render(args) => commands::render::run(args, &globals),
        Command::BenchCube(args) => commands::bench_cube::run(args, &globals),
        Command::GradientMap(args) => commands::gradient_map::run(args, &globals),
        Command::Metrics(args) => commands::metrics::run(args, &globals),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

//! `hdls`: simulate panels, estimate joint spectral distributions, solve the
//! limiting equations, build spectral density matrix estimates and run
//! bootstrap model selection.
//!
//! Failures print one JSON line `{"error": {"kind": ..., "message": ...}}` on
//! stderr and exit with status 1.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use hdls_core::fit::GFamily;

use commands::{Overrides, Paths};

#[derive(Parser, Debug)]
#[command(
    name = "hdls",
    version,
    about = "Spectral estimation for high-dimensional linear time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Panel CSV, one series per row.
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Directory for results, created if missing.
    #[arg(long, global = true, default_value = ".")]
    output: PathBuf,

    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Discrepancy exponent.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..=2))]
    kappa: Option<u32>,

    /// Weight functions: bspline<N>, constant, narrowband or narrowband:<bumps>.
    #[arg(long, global = true)]
    gfamily: Option<GFamily>,

    /// Lags for model selection, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    tau: Option<Vec<usize>>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Simulate a panel from a grid (writes panel.csv).
    Simulate,
    /// Fit grid weights to a panel (writes fit.json and cdf_*.csv).
    Estimate,
    /// Solve the limiting equations for given weights (writes transforms.csv, density.csv).
    Lsd,
    /// Spectral density matrix estimate (writes u_hat.csv, sdm.csv, atoms.json).
    Sdm,
    /// Bootstrap model selection (writes report.json, rankings.csv).
    Select,
    /// Pairwise correlations and PVE of a panel (writes correlations.csv, pve.csv).
    Corrhist,
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<hdls_core::Error>() {
            return e.kind();
        }
        if cause.is::<io::ParseError>() || cause.is::<csv::Error>() {
            return "parse";
        }
        if cause.is::<serde_json::Error>() {
            return "config";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "error"
}

fn report(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": { "kind": kind, "message": message.replace('\n', " ") } });
    eprintln!("{line}");
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon_pool(n)?;
    }
    std::fs::create_dir_all(&cli.output).with_context(|| format!("creating {}", cli.output.display()))?;
    let paths = Paths {
        config: cli.config,
        input: cli.input,
        output: cli.output,
    };
    let overrides = Overrides {
        seed: cli.seed,
        kappa: cli.kappa,
        gfamily: cli.gfamily,
        taus: cli.tau,
    };
    match cli.command {
        Command::Simulate => commands::simulate(&paths, &overrides),
        Command::Estimate => commands::estimate(&paths, &overrides),
        Command::Lsd => commands::lsd(&paths, &overrides),
        Command::Sdm => commands::sdm(&paths, &overrides),
        Command::Select => commands::select(&paths, &overrides),
        Command::Corrhist => commands::corrhist(&paths, &overrides),
    }
}

fn rayon_pool(threads: usize) -> anyhow::Result<()> {
    if threads == 0 {
        anyhow::bail!("--threads must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HDLS_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            report("usage", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            report(error_kind(&err), &format!("{err:#}"));
            ExitCode::FAILURE
        }
    }
}

//! Batch experiment driver: runs scenario x filter x seed grids from a TOML
//! configuration and writes plot-ready metric CSVs.

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{parse_config, RunConfig};
use runner::RunOptions;

/// Environment variable holding the default output root.
const OUT_ENV: &str = "AIRTRACK_OUT";

#[derive(Parser)]
#[command(name = "airtrack", version, about = "Multi-target tracking experiment driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the full run grid from a config file.
    Run {
        config: PathBuf,
        /// Run a single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides the config and AIRTRACK_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent runs.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Also write per-scan tracker logs as newline-delimited JSON.
        #[arg(long)]
        trace: bool,
    },
    /// Parse and validate a config file, reporting errors with line numbers.
    Validate { config: PathBuf },
    /// Generate the scenario only: ground-truth and detection dumps.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text)
}

fn resolve_out(cli_out: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    cli_out
        .or_else(|| config.output.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("airtrack-out"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load(&config) {
            Ok(_) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("config error: {e:#}");
                ExitCode::from(2)
            }
        },
        Command::Run { config, seed, out, workers, trace } => {
            let parsed = match load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e:#}");
                    return ExitCode::from(2);
                }
            };
            let seeds = match parsed.resolve_seeds(seed) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("config error: {e:#}");
                    return ExitCode::from(2);
                }
            };
            let opts = RunOptions {
                out: resolve_out(out, &parsed),
                seeds,
                workers,
                trace,
            };
            match runner::run(&parsed, &opts) {
                Ok((ok, total)) => {
                    println!("{ok}/{total} runs succeeded; outputs in {}", opts.out.display());
                    if ok == 0 {
                        ExitCode::FAILURE
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Simulate { config, seed, out } => {
            let parsed = match load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e:#}");
                    return ExitCode::from(2);
                }
            };
            let seed = seed
                .or_else(|| parsed.resolve_seeds(None).ok().and_then(|s| s.first().copied()))
                .unwrap_or(1);
            let out = resolve_out(out, &parsed);
            match runner::simulate(&parsed, &out, seed) {
                Ok(()) => {
                    println!("scenario written to {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}

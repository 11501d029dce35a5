//! Command-line front end for the blockmix library: simulate collections,
//! fit the clustering model, evaluate prior analytics, and summarize
//! posterior traces.
//!
//! Progress and notices go to stderr; every command prints one JSON report
//! to stdout and writes its artifacts under `--output`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod analytics_cmd;
mod fit;
mod manifest;
mod output;
mod simulate;
mod summarize;

#[derive(Parser)]
#[command(name = "blockmix", version = blockmix::VERSION, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a network collection and write it with its ground truth.
    Simulate {
        /// JSON simulation config.
        config: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
        /// RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overwrite existing output files.
        #[arg(long)]
        force: bool,
    },
    /// Fit the model to a collection, writing one JSONL trace per chain.
    Fit {
        /// Collection manifest (JSON).
        manifest: PathBuf,
        /// Sampler config (JSON); defaults apply when omitted.
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of independent chains.
        #[arg(long, default_value_t = 1)]
        chains: usize,
        /// Override the config iteration count.
        #[arg(long)]
        iterations: Option<u64>,
        /// Override the config burn-in.
        #[arg(long)]
        burn_in: Option<u64>,
        /// Override the config thinning interval.
        #[arg(long)]
        thin: Option<u64>,
        /// Overwrite existing output files.
        #[arg(long)]
        force: bool,
    },
    /// Evaluate prior summaries, or run a replicated property study.
    Analytics {
        /// JSON analytics config.
        config: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
        /// RNG seed (used by grid mode).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overwrite existing output files.
        #[arg(long)]
        force: bool,
    },
    /// Reduce posterior traces to incidences, point estimates, and
    /// assortativity samples.
    Summarize {
        /// Collection manifest (JSON).
        manifest: PathBuf,
        /// One or more trace files (JSONL); multiple chains are pooled.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
        /// Loss weight against splitting items that belong together.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Loss weight against merging items that belong apart.
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        /// Overwrite existing output files.
        #[arg(long)]
        force: bool,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            output,
            seed,
            force,
        } => simulate::cmd_simulate(&config, &output, seed, force),
        Command::Fit {
            manifest,
            config,
            output,
            seed,
            chains,
            iterations,
            burn_in,
            thin,
            force,
        } => fit::cmd_fit(
            &manifest,
            config.as_deref(),
            &fit::FitOverrides {
                seed,
                iterations,
                burn_in,
                thinning: thin,
            },
            chains,
            &output,
            force,
        ),
        Command::Analytics {
            config,
            output,
            seed,
            force,
        } => analytics_cmd::cmd_analytics(&config, &output, seed, force),
        Command::Summarize {
            manifest,
            traces,
            output,
            a,
            b,
            force,
        } => summarize::cmd_summarize(&manifest, &traces, a, b, &output, force),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

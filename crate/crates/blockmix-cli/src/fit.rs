//! `fit`: run one or more MCMC chains over a network collection and write
//! each chain's trace as JSON Lines.

use std::fs;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use blockmix::mcmc::{run_chain_with, McmcConfig, ProgressEvent, RunResult};
use blockmix::trace::{write_trace, TraceMeta};

use crate::manifest::CollectionManifest;
use crate::output::{digest16, OutputDir};

pub struct FitOverrides {
    pub seed: Option<u64>,
    pub iterations: Option<u64>,
    pub burn_in: Option<u64>,
    pub thinning: Option<u64>,
}

#[derive(Serialize)]
struct FitReport {
    seed: u64,
    config_digest: String,
    tool_version: String,
    chains: usize,
    samples_per_chain: u64,
    traces: Vec<String>,
    split_accept_rate: f64,
    hyper_accept_rate: f64,
}

fn rate(accepts: u64, attempts: u64) -> f64 {
    if attempts == 0 {
        0.0
    } else {
        accepts as f64 / attempts as f64
    }
}

pub fn cmd_fit(
    manifest_path: &Path,
    config_path: Option<&Path>,
    overrides: &FitOverrides,
    chains: usize,
    output: &Path,
    force: bool,
) -> Result<()> {
    anyhow::ensure!(chains > 0, "at least one chain is required");
    let (_manifest, collection) = CollectionManifest::load(manifest_path)?;

    let mut config = match config_path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading sampler config {}", p.display()))?;
            serde_json::from_str::<McmcConfig>(&text)
                .with_context(|| format!("parsing sampler config {}", p.display()))?
        }
        None => McmcConfig::default(),
    };
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(iterations) = overrides.iterations {
        config.iterations = iterations;
    }
    if let Some(burn_in) = overrides.burn_in {
        config.burn_in = burn_in;
    }
    if let Some(thinning) = overrides.thinning {
        config.thinning = thinning;
    }
    config.validate().context("sampler config is invalid")?;

    // The digest covers the effective config, overrides included, so two
    // runs with the same digest really did sample the same posterior.
    let digest = digest16(&serde_json::to_string(&config)?);
    let out = OutputDir::new(output, force)?;

    // Claim the output files up front; failing on an existing file after
    // hours of sampling would be unkind.
    let mut writers: Vec<(String, BufWriter<File>)> = Vec::with_capacity(chains);
    for chain in 0..chains {
        let name = format!("trace_chain{chain}.jsonl");
        let (_, file) = out.create(&name)?;
        writers.push((name, BufWriter::new(file)));
    }

    let results: Vec<RunResult> = (0..chains)
        .into_par_iter()
        .map(|chain| {
            let meta = TraceMeta {
                seed: config.seed,
                config_digest: digest.clone(),
                tool_version: blockmix::VERSION.to_string(),
                chain,
            };
            let progress = |e: &ProgressEvent| {
                eprintln!(
                    "[chain {chain}] iter {}/{} log_post {:.4} clusters {} \
                     split_acc {:.3} hyper_acc {:.3}",
                    e.iter,
                    e.iterations,
                    e.log_post,
                    e.n_clusters,
                    e.split_accept_rate,
                    e.hyper_accept_rate
                );
            };
            run_chain_with(&collection, &config, meta, progress)
                .with_context(|| format!("running chain {chain}"))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut traces = Vec::with_capacity(chains);
    let mut split_attempts = 0;
    let mut split_accepts = 0;
    let mut hyper_attempts = 0;
    let mut hyper_accepts = 0;
    for (result, (name, mut writer)) in results.iter().zip(writers) {
        for notice in &result.notices {
            eprintln!("note: {notice}");
        }
        write_trace(&mut writer, &result.trace)
            .with_context(|| format!("writing {name}"))?;
        writer.flush()?;
        traces.push(out.path(&name).display().to_string());
        split_attempts += result.split_attempts;
        split_accepts += result.split_accepts;
        hyper_attempts += result.hyper_attempts;
        hyper_accepts += result.hyper_accepts;
    }

    let report = FitReport {
        seed: config.seed,
        config_digest: digest,
        tool_version: blockmix::VERSION.to_string(),
        chains,
        samples_per_chain: results[0].trace.samples.len() as u64,
        traces,
        split_accept_rate: rate(split_accepts, split_attempts),
        hyper_accept_rate: rate(hyper_accepts, hyper_attempts),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

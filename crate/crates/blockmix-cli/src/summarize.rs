//! `summarize`: pool one or more traces and reduce them to incidence
//! matrices, loss-based point estimates, and per-sample assortativity.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use blockmix::partition::Partition;
use blockmix::summaries::{
    actor_incidence, network_incidence, point_estimate, posterior_assortativity,
    IncidenceMatrix,
};
use blockmix::trace::{read_trace, Trace};

use crate::analytics_cmd::csv_text;
use crate::manifest::CollectionManifest;
use crate::output::{OutputDir, RunMeta};

#[derive(Serialize)]
struct PartitionEstimate {
    seed: u64,
    config_digest: String,
    tool_version: String,
    a: f64,
    b: f64,
    labels: Vec<usize>,
    attained_u: f64,
    /// Networks grouped under each label (for the clustering estimate) or
    /// actors (for a faction estimate).
    #[serde(skip_serializing_if = "Option::is_none")]
    members: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct SummarizeReport {
    seed: u64,
    config_digest: String,
    tool_version: String,
    pooled_samples: usize,
    n_networks: usize,
    n_clusters: usize,
    zeta_estimate: Vec<usize>,
    files: Vec<String>,
}

/// Pool chains by concatenating samples. Every sample carries equal
/// weight, so this matches averaging per-chain incidences weighted by
/// their sample counts.
fn pool(traces: Vec<Trace>) -> Result<Trace> {
    let mut iter = traces.into_iter();
    let mut pooled = iter
        .next()
        .ok_or_else(|| anyhow::anyhow!("at least one trace is required"))?;
    for trace in iter {
        if trace.meta.config_digest != pooled.meta.config_digest {
            bail!(
                "traces disagree on config digest ({} vs {}); refusing to pool \
                 samples from different runs",
                trace.meta.config_digest,
                pooled.meta.config_digest
            );
        }
        pooled.samples.extend(trace.samples);
    }
    Ok(pooled)
}

fn incidence_csv(meta: &RunMeta, label: &str, names: &[String], m: &IncidenceMatrix) -> String {
    let mut csv = String::new();
    let _ = writeln!(csv, "{}", meta.comment());
    let mut header = label.to_string();
    for name in names {
        header.push(',');
        header.push_str(&csv_text(name));
    }
    let _ = writeln!(csv, "{header}");
    for (i, name) in names.iter().enumerate() {
        let mut row = csv_text(name);
        for j in 0..m.n() {
            let _ = write!(row, ",{:.6}", m.get(i, j));
        }
        let _ = writeln!(csv, "{row}");
    }
    csv
}

fn distinct_partitions<'a>(labelings: impl Iterator<Item = &'a [usize]>) -> Vec<Partition> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for labels in labelings {
        let p = Partition::from_labels(labels);
        if seen.insert(p.labels().to_vec()) {
            out.push(p);
        }
    }
    out
}

pub fn cmd_summarize(
    manifest_path: &Path,
    trace_paths: &[PathBuf],
    a: f64,
    b: f64,
    output: &Path,
    force: bool,
) -> Result<()> {
    let (_manifest, collection) = CollectionManifest::load(manifest_path)?;
    anyhow::ensure!(!trace_paths.is_empty(), "at least one trace is required");

    let mut traces = Vec::with_capacity(trace_paths.len());
    for path in trace_paths {
        let file =
            File::open(path).with_context(|| format!("opening trace {}", path.display()))?;
        let trace = read_trace(BufReader::new(file))
            .with_context(|| format!("reading trace {}", path.display()))?;
        traces.push(trace);
    }
    let trace = pool(traces)?;

    let n_networks = collection.n_networks();
    let n_actors = collection.n_actors();
    for (s, sample) in trace.samples.iter().enumerate() {
        if sample.zeta.len() != n_networks {
            bail!(
                "trace sample {s} covers {} networks, manifest declares {n_networks}",
                sample.zeta.len()
            );
        }
        if sample.xi.iter().any(|f| f.len() != n_actors) {
            bail!(
                "trace sample {s} has a faction vector not covering {n_actors} actors"
            );
        }
        if sample.zeta.iter().any(|&k| k >= sample.xi.len()) {
            bail!("trace sample {s} assigns a network to a cluster with no factions");
        }
    }

    let meta = RunMeta {
        seed: trace.meta.seed,
        config_digest: trace.meta.config_digest.clone(),
        tool_version: trace.meta.tool_version.clone(),
    };
    let out = OutputDir::new(output, force)?;
    let mut files = Vec::new();

    let network_names: Vec<String> = (0..n_networks).map(|j| j.to_string()).collect();
    let actor_names: Vec<String> = match collection.actor_names() {
        Some(names) => names.to_vec(),
        None => (0..n_actors).map(|i| i.to_string()).collect(),
    };

    // Network-level incidence and clustering estimate.
    let net_incidence = network_incidence(&trace)?;
    out.write_string(
        "network_incidence.csv",
        &incidence_csv(&meta, "network", &network_names, &net_incidence),
    )?;
    files.push("network_incidence.csv".to_string());

    let zeta_candidates = distinct_partitions(trace.samples.iter().map(|s| s.zeta.as_slice()));
    let (zeta_hat, zeta_u) = point_estimate(&net_incidence, a, b, &zeta_candidates)?;
    out.write_json(
        "zeta_estimate.json",
        &PartitionEstimate {
            seed: meta.seed,
            config_digest: meta.config_digest.clone(),
            tool_version: meta.tool_version.clone(),
            a,
            b,
            labels: zeta_hat.labels().to_vec(),
            attained_u: zeta_u,
            members: None,
        },
    )?;
    files.push("zeta_estimate.json".to_string());

    // Actor-level incidence per network, and one faction estimate per
    // estimated cluster (taking the cluster's first network as the
    // representative: cluster members share their faction samples).
    for j in 0..n_networks {
        let inc = actor_incidence(&trace, j)?;
        let name = format!("actor_incidence_net{j}.csv");
        out.write_string(&name, &incidence_csv(&meta, "actor", &actor_names, &inc))?;
        files.push(name);
    }

    for k in 0..zeta_hat.num_blocks() {
        let members: Vec<usize> = (0..n_networks)
            .filter(|&j| zeta_hat.block_of(j) == k)
            .collect();
        let rep = members[0];
        let inc = actor_incidence(&trace, rep)?;
        let candidates = distinct_partitions(
            trace
                .samples
                .iter()
                .map(|s| s.xi[s.zeta[rep]].as_slice()),
        );
        let (xi_hat, xi_u) = point_estimate(&inc, a, b, &candidates)?;
        let name = format!("xi_estimate_cluster{k}.json");
        out.write_json(
            &name,
            &PartitionEstimate {
                seed: meta.seed,
                config_digest: meta.config_digest.clone(),
                tool_version: meta.tool_version.clone(),
                a,
                b,
                labels: xi_hat.labels().to_vec(),
                attained_u: xi_u,
                members: Some(members),
            },
        )?;
        files.push(name);
    }

    // Per-sample assortativity of every network, one long table.
    let mut assort_csv = String::new();
    writeln!(assort_csv, "{}", meta.comment())?;
    writeln!(assort_csv, "network,sample,upsilon")?;
    for j in 0..n_networks {
        let values = posterior_assortativity(&trace, &collection, j)?;
        for (s, v) in values.iter().enumerate() {
            writeln!(assort_csv, "{j},{s},{v:.12}")?;
        }
    }
    out.write_string("assortativity.csv", &assort_csv)?;
    files.push("assortativity.csv".to_string());

    let report = SummarizeReport {
        seed: meta.seed,
        config_digest: meta.config_digest.clone(),
        tool_version: meta.tool_version.clone(),
        pooled_samples: trace.samples.len(),
        n_networks,
        n_clusters: zeta_hat.num_blocks(),
        zeta_estimate: zeta_hat.labels().to_vec(),
        files: files
            .iter()
            .map(|f| out.path(f).display().to_string())
            .collect(),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

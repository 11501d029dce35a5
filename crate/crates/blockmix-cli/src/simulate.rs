//! `simulate`: draw a synthetic collection from the generative model and
//! write it out as a manifest plus headerless network CSVs, together with
//! the ground-truth partitions used to produce it.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use blockmix::analytics::{simulate_network_given, BlockDist, GenerativeKernel};
use blockmix::kernels::KernelSpec;
use blockmix::network::Family;
use blockmix::partition::Partition;
use blockmix::pyp::{sample_partition, PitmanYorParams};
use blockmix::rng::stream_rng;

use crate::manifest::{CollectionManifest, NetworkEntry, MANIFEST_VERSION};
use crate::output::{digest16, OutputDir, RunMeta};

/// A group of networks sharing one faction structure. The factions are
/// either fixed explicitly or drawn from the faction prior.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    /// Indices into `networks`, 0-based.
    pub members: Vec<usize>,
    /// Fixed faction labels, one per actor. Omit to sample from the prior.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factions: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub directed: bool,
    pub family: Family,
    /// Block-parameter distribution for within-faction dyads.
    pub diag: BlockDist,
    /// ... and for between-faction dyads.
    pub offdiag: BlockDist,
    /// Inference kernel to record in the manifest; defaults to the flat
    /// spec for the family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
}

fn default_faction_prior() -> PitmanYorParams {
    PitmanYorParams::new(0.0, 1.0).expect("unit concentration is valid")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_actors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_names: Option<Vec<String>>,
    #[serde(default = "default_faction_prior")]
    pub faction_prior: PitmanYorParams,
    pub groups: Vec<GroupConfig>,
    pub networks: Vec<NetworkConfig>,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.n_actors == 0 {
            bail!("n_actors must be positive");
        }
        if self.networks.is_empty() {
            bail!("the collection needs at least one network");
        }
        if let Some(names) = &self.actor_names {
            if names.len() != self.n_actors {
                bail!(
                    "actor_names has {} entries, n_actors is {}",
                    names.len(),
                    self.n_actors
                );
            }
        }
        self.faction_prior
            .validate()
            .context("faction_prior is invalid")?;
        let mut seen = vec![false; self.networks.len()];
        for (g, group) in self.groups.iter().enumerate() {
            if group.members.is_empty() {
                bail!("group {g} has no member networks");
            }
            for &j in &group.members {
                if j >= self.networks.len() {
                    bail!(
                        "group {g} names network {j}, but only {} are configured",
                        self.networks.len()
                    );
                }
                if seen[j] {
                    bail!("network {j} appears in more than one group");
                }
                seen[j] = true;
            }
            if let Some(factions) = &group.factions {
                if factions.len() != self.n_actors {
                    bail!(
                        "group {g} fixes {} faction labels, n_actors is {}",
                        factions.len(),
                        self.n_actors
                    );
                }
            }
        }
        if let Some(j) = seen.iter().position(|&s| !s) {
            bail!("network {j} is not assigned to any group");
        }
        for (j, net) in self.networks.iter().enumerate() {
            GenerativeKernel::new(net.family, net.diag, net.offdiag)
                .with_context(|| format!("network {j} block distributions are invalid"))?;
            if let Some(kernel) = &net.kernel {
                kernel
                    .validate()
                    .with_context(|| format!("network {j} inference kernel is invalid"))?;
                let implied = match kernel.family {
                    blockmix::kernels::KernelFamily::BernoulliBeta => Family::Binary,
                    blockmix::kernels::KernelFamily::PoissonGamma => Family::Count,
                };
                if implied != net.family {
                    bail!(
                        "network {j} declares family {} but its inference kernel is for {}",
                        net.family,
                        implied
                    );
                }
            }
        }
        Ok(())
    }
}

/// Ground truth written alongside the simulated data.
#[derive(Debug, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub config_digest: String,
    pub tool_version: String,
    /// Network-to-cluster labels, canonical (first appearance) order.
    pub zeta: Vec<usize>,
    /// Faction labels per cluster, indexed by the zeta labels.
    pub xi: Vec<Vec<usize>>,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    seed: u64,
    config_digest: &'a str,
    tool_version: &'a str,
    manifest: String,
    truth: String,
    networks: Vec<String>,
}

pub fn cmd_simulate(config_path: &Path, output: &Path, seed: u64, force: bool) -> Result<()> {
    let raw = fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let config: SimConfig = serde_json::from_str(&raw)
        .with_context(|| format!("parsing config {}", config_path.display()))?;
    config.validate()?;

    let meta = RunMeta::new(seed, digest16(&raw));
    let out = OutputDir::new(output, force)?;

    // Cluster labels follow group order; groups are the clusters.
    let mut zeta = vec![0usize; config.networks.len()];
    let mut xi: Vec<Partition> = Vec::with_capacity(config.groups.len());
    for (g, group) in config.groups.iter().enumerate() {
        for &j in &group.members {
            zeta[j] = g;
        }
        let factions = match &group.factions {
            Some(labels) => Partition::from_labels(labels),
            None => {
                let mut rng = stream_rng(seed, &[0, g as u64]);
                sample_partition(config.n_actors, &config.faction_prior, &mut rng)
            }
        };
        xi.push(factions);
    }

    let mut entries = Vec::with_capacity(config.networks.len());
    let mut files = Vec::with_capacity(config.networks.len());
    for (j, net_config) in config.networks.iter().enumerate() {
        let generative =
            GenerativeKernel::new(net_config.family, net_config.diag, net_config.offdiag)?;
        let mut rng = stream_rng(seed, &[1, j as u64]);
        let (network, _theta) =
            simulate_network_given(&xi[zeta[j]], &generative, net_config.directed, &mut rng)
                .with_context(|| format!("simulating network {j}"))?;
        let name = format!("net{j}.csv");
        out.write_string(&name, &network.to_csv())?;
        entries.push(NetworkEntry {
            path: name.clone(),
            directed: net_config.directed,
            acyclic: true,
            family: net_config.family,
            kernel: Some(
                net_config
                    .kernel
                    .unwrap_or_else(|| KernelSpec::default_for(net_config.family)),
            ),
        });
        files.push(name);
    }

    let manifest = CollectionManifest {
        version: MANIFEST_VERSION.to_string(),
        seed: Some(meta.seed),
        config_digest: Some(meta.config_digest.clone()),
        tool_version: Some(meta.tool_version.clone()),
        n_actors: config.n_actors,
        actor_names: config.actor_names.clone(),
        networks: entries,
    };
    out.write_json("manifest.json", &manifest)?;

    let truth = GroundTruth {
        seed: meta.seed,
        config_digest: meta.config_digest.clone(),
        tool_version: meta.tool_version.clone(),
        zeta,
        xi: xi.iter().map(|p| p.labels().to_vec()).collect(),
    };
    out.write_json("truth.json", &truth)?;

    let report = SimulateReport {
        seed: meta.seed,
        config_digest: &meta.config_digest,
        tool_version: &meta.tool_version,
        manifest: out.path("manifest.json").display().to_string(),
        truth: out.path("truth.json").display().to_string(),
        networks: files,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

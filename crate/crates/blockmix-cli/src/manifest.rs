//! The collection manifest: one JSON document naming the network CSV
//! files and carrying every per-network flag, so the matrices themselves
//! stay headerless.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use blockmix::kernels::KernelSpec;
use blockmix::network::{parse_matrix_csv, Family, Network, NetworkCollection};

pub const MANIFEST_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkEntry {
    pub path: String,
    pub directed: bool,
    pub acyclic: bool,
    pub family: Family,
    /// Inference kernel; defaults to the flat spec for the family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionManifest {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
    pub n_actors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_names: Option<Vec<String>>,
    pub networks: Vec<NetworkEntry>,
}

impl CollectionManifest {
    /// Parse the manifest and load every referenced network, resolving
    /// paths relative to the manifest's own directory.
    pub fn load(path: &Path) -> Result<(Self, NetworkCollection)> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let manifest: CollectionManifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        if manifest.version != MANIFEST_VERSION {
            bail!(
                "unsupported manifest version {:?} (this tool reads version {:?})",
                manifest.version,
                MANIFEST_VERSION
            );
        }
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut networks = Vec::with_capacity(manifest.networks.len());
        let mut kernels = Vec::with_capacity(manifest.networks.len());
        for (j, entry) in manifest.networks.iter().enumerate() {
            let file = base.join(&entry.path);
            let csv = fs::read_to_string(&file)
                .with_context(|| format!("reading network {j} from {}", file.display()))?;
            let rows = parse_matrix_csv(&csv)
                .with_context(|| format!("parsing network {j} ({})", file.display()))?;
            let net = Network::new(rows, entry.directed, entry.acyclic, entry.family)
                .with_context(|| format!("validating network {j} ({})", file.display()))?;
            if net.n_actors() != manifest.n_actors {
                bail!(
                    "network {j} has {} actors, manifest declares {}",
                    net.n_actors(),
                    manifest.n_actors
                );
            }
            kernels.push(
                entry
                    .kernel
                    .unwrap_or_else(|| KernelSpec::default_for(entry.family)),
            );
            networks.push(net);
        }
        let collection =
            NetworkCollection::new(networks, kernels, manifest.actor_names.clone())
                .context("assembling network collection")?;
        Ok((manifest, collection))
    }
}

//! Output-directory plumbing shared by all subcommands: overwrite
//! protection, run metadata, and the config digest embedded in every file.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

/// Provenance stamped into every output file.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunMeta {
    pub seed: u64,
    pub config_digest: String,
    pub tool_version: String,
}

impl RunMeta {
    pub fn new(seed: u64, config_digest: String) -> Self {
        RunMeta {
            seed,
            config_digest,
            tool_version: blockmix::VERSION.to_string(),
        }
    }

    /// Comment line placed at the top of CSV outputs.
    pub fn comment(&self) -> String {
        format!(
            "# seed={} config_digest={} tool_version={}",
            self.seed, self.config_digest, self.tool_version
        )
    }
}

/// First 16 hex characters of the SHA-256 of `payload`; enough to identify
/// a configuration at a glance while staying short in headers.
pub fn digest16(payload: &str) -> String {
    let hash = Sha256::digest(payload.as_bytes());
    let mut out = String::with_capacity(16);
    for b in &hash[..8] {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// A target directory with create-or-refuse semantics per file.
pub struct OutputDir {
    dir: PathBuf,
    force: bool,
}

impl OutputDir {
    pub fn new(dir: &Path, force: bool) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(OutputDir { dir: dir.to_path_buf(), force })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Create `name` inside the directory, refusing to overwrite an
    /// existing file unless --force was given.
    pub fn create(&self, name: &str) -> Result<(PathBuf, File)> {
        let path = self.dir.join(name);
        if path.exists() && !self.force {
            bail!(
                "output file {} already exists (pass --force to overwrite)",
                path.display()
            );
        }
        let file = File::create(&path)
            .with_context(|| format!("creating output file {}", path.display()))?;
        Ok((path, file))
    }

    pub fn write_string(&self, name: &str, content: &str) -> Result<PathBuf> {
        let (path, mut file) = self.create(name)?;
        file.write_all(content.as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Serialize a JSON value with a trailing newline.
    pub fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_string(name, &text)
    }
}

//! Chain trace persistence.
//!
//! A trace file is JSON Lines: the first record carries run metadata (seed,
//! config digest, tool version, chain index), every following record is one
//! retained posterior sample. Partitions are stored in canonical label form,
//! so byte equality of two trace files means the chains really were
//! identical.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One retained posterior sample. `xi` holds one faction labeling per
/// network cluster, indexed by the canonical cluster labels of `zeta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub iter: u64,
    pub zeta: Vec<usize>,
    pub xi: Vec<Vec<usize>>,
    pub hyper: BTreeMap<String, f64>,
    pub log_post: f64,
}

/// Identifies the run that produced a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub seed: u64,
    pub config_digest: String,
    pub tool_version: String,
    pub chain: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub samples: Vec<TraceSample>,
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: TraceMeta,
}

pub fn write_trace<W: Write>(mut out: W, trace: &Trace) -> Result<()> {
    let meta = serde_json::to_string(&MetaLine {
        meta: trace.meta.clone(),
    })?;
    writeln!(out, "{meta}")?;
    for sample in &trace.samples {
        let line = serde_json::to_string(sample)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Trace> {
    let mut lines = input.lines().enumerate();
    let meta = match lines.next() {
        None => return Err(Error::EmptyInput("trace file has no records".into())),
        Some((_, line)) => {
            let line = line?;
            serde_json::from_str::<MetaLine>(&line)
                .map_err(|e| Error::Parse {
                    line: 1,
                    message: format!("bad trace metadata record: {e}"),
                })?
                .meta
        }
    };

    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: TraceSample = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: format!("bad trace sample record: {e}"),
        })?;
        validate_sample(&sample, samples.last(), idx + 1)?;
        samples.push(sample);
    }
    Ok(Trace { meta, samples })
}

fn validate_sample(sample: &TraceSample, prev: Option<&TraceSample>, line: usize) -> Result<()> {
    let clusters = sample.zeta.iter().copied().max().map_or(0, |m| m + 1);
    if sample.xi.len() != clusters {
        return Err(Error::Parse {
            line,
            message: format!(
                "sample has {} faction labelings for {} network clusters",
                sample.xi.len(),
                clusters
            ),
        });
    }
    if let Some(prev) = prev {
        if prev.zeta.len() != sample.zeta.len() {
            return Err(Error::Parse {
                line,
                message: "network count changed between samples".into(),
            });
        }
        if let (Some(a), Some(b)) = (prev.xi.first(), sample.xi.first()) {
            if a.len() != b.len() {
                return Err(Error::Parse {
                    line,
                    message: "actor count changed between samples".into(),
                });
            }
        }
    }
    Ok(())
}

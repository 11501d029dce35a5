//! `analytics`: evaluate the closed-form prior summaries for one setting,
//! or replicate simulated networks over a grid of settings and tabulate
//! degree and clustering behaviour.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use blockmix::analytics::{prior_summary, property_study, GenerativeKernel, StudyCell};
use blockmix::pyp::PitmanYorParams;

use crate::output::{digest16, OutputDir, RunMeta};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub label: String,
    pub n_actors: usize,
    /// Overrides the grid-level replicate count for this cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    pub params: PitmanYorParams,
    pub kernel: GenerativeKernel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyticsConfig {
    /// One closed-form evaluation.
    Single {
        n_actors: usize,
        directed: bool,
        params: PitmanYorParams,
        kernel: GenerativeKernel,
    },
    /// Replicated simulation over a grid of cells.
    Grid {
        replicates: usize,
        cells: Vec<CellConfig>,
    },
}

impl AnalyticsConfig {
    fn validate(&self) -> Result<()> {
        match self {
            AnalyticsConfig::Single {
                n_actors,
                params,
                kernel,
                ..
            } => {
                if *n_actors == 0 {
                    bail!("n_actors must be positive");
                }
                params.validate()?;
                kernel.validate()?;
            }
            AnalyticsConfig::Grid { replicates, cells } => {
                if cells.is_empty() {
                    bail!("the grid needs at least one cell");
                }
                for cell in cells {
                    if cell.n_actors == 0 {
                        bail!("cell {:?}: n_actors must be positive", cell.label);
                    }
                    if cell.replicates.unwrap_or(*replicates) == 0 {
                        bail!("cell {:?}: replicate count must be positive", cell.label);
                    }
                    cell.params
                        .validate()
                        .with_context(|| format!("cell {:?}", cell.label))?;
                    cell.kernel
                        .validate()
                        .with_context(|| format!("cell {:?}", cell.label))?;
                }
            }
        }
        Ok(())
    }
}

fn csv_field(value: f64) -> String {
    format!("{value:.12}")
}

/// Quote a text field when it would otherwise break the row.
pub(crate) fn csv_text(value: &str) -> String {
    if value.contains([',', '"', '\n']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

pub fn cmd_analytics(config_path: &Path, output: &Path, seed: u64, force: bool) -> Result<()> {
    let raw = fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let config: AnalyticsConfig = serde_json::from_str(&raw)
        .with_context(|| format!("parsing config {}", config_path.display()))?;
    config.validate()?;

    let meta = RunMeta::new(seed, digest16(&raw));
    let out = OutputDir::new(output, force)?;

    match &config {
        AnalyticsConfig::Single {
            n_actors,
            directed,
            params,
            kernel,
        } => {
            let summary = prior_summary(*n_actors, params, kernel, *directed)?;
            let mut csv = String::new();
            writeln!(csv, "{}", meta.comment())?;
            writeln!(
                csv,
                "n_actors,directed,discount,concentration,theta_bar,rho_bar,\
                 kappa_bar,delta_bar,chi_bar,upsilon"
            )?;
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{}",
                n_actors,
                directed,
                params.discount(),
                params.concentration(),
                csv_field(summary.theta_bar),
                csv_field(summary.rho_bar),
                csv_field(summary.kappa_bar),
                summary.delta_bar.map(csv_field).unwrap_or_default(),
                csv_field(summary.chi_bar),
                csv_field(summary.upsilon),
            )?;
            out.write_string("prior_summary.csv", &csv)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        AnalyticsConfig::Grid { replicates, cells } => {
            let study_cells: Vec<StudyCell> = cells
                .iter()
                .map(|cell| StudyCell {
                    label: cell.label.clone(),
                    params: cell.params,
                    kernel: cell.kernel,
                    n_actors: cell.n_actors,
                    replicates: cell.replicates.unwrap_or(*replicates),
                })
                .collect();
            let report = property_study(&study_cells, seed)?;

            let mut summary_csv = String::new();
            writeln!(summary_csv, "{}", meta.comment())?;
            writeln!(
                summary_csv,
                "label,n_actors,replicates,mean_degree,mean_degree_se,\
                 mean_clustering,mean_clustering_se,baseline_clustering,\
                 baseline_clustering_se"
            )?;
            let mut survival_csv = String::new();
            writeln!(survival_csv, "{}", meta.comment())?;
            writeln!(survival_csv, "label,degree,prob,se")?;
            for cell in &report.cells {
                writeln!(
                    summary_csv,
                    "{},{},{},{},{},{},{},{},{}",
                    csv_text(&cell.label),
                    cell.n_actors,
                    cell.replicates,
                    csv_field(cell.mean_degree),
                    csv_field(cell.mean_degree_se),
                    csv_field(cell.mean_clustering),
                    csv_field(cell.mean_clustering_se),
                    csv_field(cell.baseline_clustering),
                    csv_field(cell.baseline_clustering_se),
                )?;
                for point in &cell.survival {
                    writeln!(
                        survival_csv,
                        "{},{},{},{}",
                        csv_text(&cell.label),
                        point.degree,
                        csv_field(point.prob),
                        csv_field(point.se),
                    )?;
                }
            }
            out.write_string("study_summary.csv", &summary_csv)?;
            out.write_string("study_survival.csv", &survival_csv)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

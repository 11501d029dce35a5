//! End-to-end tests running the compiled binary against temp directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use blockmix::summaries::network_incidence;
use blockmix::trace::read_trace;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blockmix"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawning the binary");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

const SIM_CONFIG: &str = r#"{
  "n_actors": 6,
  "groups": [
    { "members": [0, 1], "factions": [0, 0, 0, 1, 1, 1] },
    { "members": [2] }
  ],
  "networks": [
    { "directed": false, "family": "binary",
      "diag": { "dist": "point", "value": 0.9 },
      "offdiag": { "dist": "point", "value": 0.1 } },
    { "directed": false, "family": "binary",
      "diag": { "dist": "point", "value": 0.9 },
      "offdiag": { "dist": "point", "value": 0.1 } },
    { "directed": true, "family": "count",
      "diag": { "dist": "gamma", "shape": 4.0, "rate": 1.0 },
      "offdiag": { "dist": "gamma", "shape": 0.5, "rate": 1.0 } }
  ]
}"#;

fn write_sim_config(dir: &Path) -> PathBuf {
    let path = dir.join("sim.json");
    fs::write(&path, SIM_CONFIG).unwrap();
    path
}

fn simulate(dir: &Path) -> PathBuf {
    let config = write_sim_config(dir);
    let data = dir.join("data");
    run_ok(bin()
        .arg("simulate")
        .arg(&config)
        .arg("--output")
        .arg(&data)
        .args(["--seed", "7"]));
    data
}

#[test]
fn simulate_fit_summarize_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path());

    for name in ["manifest.json", "truth.json", "net0.csv", "net1.csv", "net2.csv"] {
        assert!(data.join(name).exists(), "missing {name}");
    }
    let truth: Value =
        serde_json::from_str(&fs::read_to_string(data.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth["zeta"], serde_json::json!([0, 0, 1]));

    let run = tmp.path().join("run");
    let fit_out = run_ok(bin()
        .arg("fit")
        .arg(data.join("manifest.json"))
        .arg("--output")
        .arg(&run)
        .args(["--seed", "3", "--chains", "2"])
        .args(["--iterations", "300", "--burn-in", "150", "--thin", "3"]));
    let fit_report = stdout_json(&fit_out);
    assert_eq!(fit_report["chains"], 2);
    assert_eq!(fit_report["samples_per_chain"], 50);
    assert_eq!(fit_report["seed"], 3);
    assert!(fit_report["config_digest"].as_str().unwrap().len() == 16);

    let summary = tmp.path().join("summary");
    let sum_out = run_ok(bin()
        .arg("summarize")
        .arg(data.join("manifest.json"))
        .arg(run.join("trace_chain0.jsonl"))
        .arg(run.join("trace_chain1.jsonl"))
        .arg("--output")
        .arg(&summary));
    let report = stdout_json(&sum_out);
    assert_eq!(report["pooled_samples"], 100);
    assert_eq!(report["n_networks"], 3);
    // Well-separated data: the estimate puts the two binary replicas
    // together and the count network apart.
    assert_eq!(report["zeta_estimate"], serde_json::json!([0, 0, 1]));

    for name in [
        "network_incidence.csv",
        "actor_incidence_net0.csv",
        "actor_incidence_net1.csv",
        "actor_incidence_net2.csv",
        "zeta_estimate.json",
        "xi_estimate_cluster0.json",
        "xi_estimate_cluster1.json",
        "assortativity.csv",
    ] {
        assert!(summary.join(name).exists(), "missing {name}");
    }

    // Trace files embed provenance on their first line.
    let trace_text = fs::read_to_string(run.join("trace_chain0.jsonl")).unwrap();
    let meta_line: Value = serde_json::from_str(trace_text.lines().next().unwrap()).unwrap();
    assert_eq!(meta_line["meta"]["seed"], 3);
    assert_eq!(meta_line["meta"]["chain"], 0);
    assert!(meta_line["meta"]["tool_version"].is_string());
}

#[test]
fn fit_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path());
    let manifest = data.join("manifest.json");

    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        run_ok(bin()
            .arg("fit")
            .arg(&manifest)
            .arg("--output")
            .arg(&dir)
            .args(["--seed", "11", "--iterations", "60", "--burn-in", "30"]));
        bytes.push(fs::read(dir.join("trace_chain0.jsonl")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);

    let dir = tmp.path().join("c");
    run_ok(bin()
        .arg("fit")
        .arg(&manifest)
        .arg("--output")
        .arg(&dir)
        .args(["--seed", "12", "--iterations", "60", "--burn-in", "30"]));
    assert_ne!(bytes[0], fs::read(dir.join("trace_chain0.jsonl")).unwrap());
}

#[test]
fn existing_output_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_sim_config(tmp.path());
    let data = tmp.path().join("data");
    run_ok(bin()
        .arg("simulate")
        .arg(&config)
        .arg("--output")
        .arg(&data));

    let out = bin()
        .arg("simulate")
        .arg(&config)
        .arg("--output")
        .arg(&data)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--force"), "stderr was: {stderr}");

    run_ok(bin()
        .arg("simulate")
        .arg(&config)
        .arg("--output")
        .arg(&data)
        .arg("--force"));
}

#[test]
fn trace_length_follows_the_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path());
    let run = tmp.path().join("run");
    run_ok(bin()
        .arg("fit")
        .arg(data.join("manifest.json"))
        .arg("--output")
        .arg(&run)
        .args(["--iterations", "100", "--burn-in", "40", "--thin", "3"]));
    let text = fs::read_to_string(run.join("trace_chain0.jsonl")).unwrap();
    // One metadata line plus (100 - 40) / 3 samples.
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn pooling_matches_sample_weighted_average() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path());
    let run = tmp.path().join("run");
    run_ok(bin()
        .arg("fit")
        .arg(data.join("manifest.json"))
        .arg("--output")
        .arg(&run)
        .args(["--seed", "5", "--chains", "2"])
        .args(["--iterations", "120", "--burn-in", "40", "--thin", "2"]));

    let mut traces = Vec::new();
    for chain in 0..2 {
        let file = fs::File::open(run.join(format!("trace_chain{chain}.jsonl"))).unwrap();
        traces.push(read_trace(std::io::BufReader::new(file)).unwrap());
    }
    let counts: Vec<f64> = traces.iter().map(|t| t.samples.len() as f64).collect();
    let incidences: Vec<_> = traces
        .iter()
        .map(|t| network_incidence(t).unwrap())
        .collect();

    let summary = tmp.path().join("summary");
    run_ok(bin()
        .arg("summarize")
        .arg(data.join("manifest.json"))
        .arg(run.join("trace_chain0.jsonl"))
        .arg(run.join("trace_chain1.jsonl"))
        .arg("--output")
        .arg(&summary));

    let csv = fs::read_to_string(summary.join("network_incidence.csv")).unwrap();
    let total: f64 = counts.iter().sum();
    for (i, line) in csv.lines().skip(2).enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        for j in 0..3 {
            let pooled: f64 = cells[j + 1].parse().unwrap();
            let expected = (counts[0] * incidences[0].get(i, j)
                + counts[1] * incidences[1].get(i, j))
                / total;
            assert!(
                (pooled - expected).abs() < 5e-7,
                "pooled incidence ({i},{j}) = {pooled}, weighted average = {expected}"
            );
        }
    }
}

#[test]
fn analytics_single_agrees_with_the_library() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("analytics.json");
    fs::write(
        &config,
        r#"{
          "mode": "single",
          "n_actors": 40,
          "directed": true,
          "params": { "discount": 0.25, "concentration": 2.0 },
          "kernel": {
            "family": "binary",
            "diag": { "dist": "beta", "a": 5.0, "b": 2.0 },
            "offdiag": { "dist": "beta", "a": 1.0, "b": 6.0 }
          }
        }"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = run_ok(bin()
        .arg("analytics")
        .arg(&config)
        .arg("--output")
        .arg(&out_dir));
    let got = stdout_json(&out);

    let params = blockmix::pyp::PitmanYorParams::new(0.25, 2.0).unwrap();
    let kernel = blockmix::analytics::GenerativeKernel::new(
        blockmix::network::Family::Binary,
        blockmix::analytics::BlockDist::Beta { a: 5.0, b: 2.0 },
        blockmix::analytics::BlockDist::Beta { a: 1.0, b: 6.0 },
    )
    .unwrap();
    let want = blockmix::analytics::prior_summary(40, &params, &kernel, true).unwrap();

    assert!((got["theta_bar"].as_f64().unwrap() - want.theta_bar).abs() < 1e-12);
    assert!((got["rho_bar"].as_f64().unwrap() - want.rho_bar).abs() < 1e-9);
    assert!((got["kappa_bar"].as_f64().unwrap() - want.kappa_bar).abs() < 1e-9);
    assert!(
        (got["delta_bar"].as_f64().unwrap() - want.delta_bar.unwrap()).abs() < 1e-12
    );
    assert!(got["upsilon"].as_f64().unwrap().is_finite());

    let csv = fs::read_to_string(out_dir.join("prior_summary.csv")).unwrap();
    assert!(csv.starts_with("# seed=0 config_digest="));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn analytics_grid_writes_both_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("grid.json");
    fs::write(
        &config,
        r#"{
          "mode": "grid",
          "replicates": 20,
          "cells": [
            { "label": "a", "n_actors": 15,
              "params": { "discount": 0.0, "concentration": 0.5 },
              "kernel": { "family": "binary",
                          "diag": { "dist": "point", "value": 0.8 },
                          "offdiag": { "dist": "point", "value": 0.2 } } },
            { "label": "b", "n_actors": 15, "replicates": 10,
              "params": { "discount": 0.5, "concentration": 5.0 },
              "kernel": { "family": "binary",
                          "diag": { "dist": "point", "value": 0.8 },
                          "offdiag": { "dist": "point", "value": 0.2 } } }
          ]
        }"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = run_ok(bin()
        .arg("analytics")
        .arg(&config)
        .arg("--output")
        .arg(&out_dir)
        .args(["--seed", "9"]));
    let report = stdout_json(&out);
    assert_eq!(report["cells"][0]["replicates"], 20);
    assert_eq!(report["cells"][1]["replicates"], 10);

    let summary = fs::read_to_string(out_dir.join("study_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4); // comment, header, two cells
    let survival = fs::read_to_string(out_dir.join("study_survival.csv")).unwrap();
    // comment, header, then one row per degree 0..I-1 per cell
    assert_eq!(survival.lines().count(), 2 + 2 * 15);
}

#[test]
fn single_actor_collection_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("sim.json");
    fs::write(
        &config,
        r#"{
          "n_actors": 1,
          "groups": [ { "members": [0], "factions": [0] } ],
          "networks": [
            { "directed": false, "family": "binary",
              "diag": { "dist": "point", "value": 0.5 },
              "offdiag": { "dist": "point", "value": 0.5 } }
          ]
        }"#,
    )
    .unwrap();
    let data = tmp.path().join("data");
    run_ok(bin()
        .arg("simulate")
        .arg(&config)
        .arg("--output")
        .arg(&data));
    assert_eq!(fs::read_to_string(data.join("net0.csv")).unwrap(), "0\n");

    let run = tmp.path().join("run");
    let out = run_ok(bin()
        .arg("fit")
        .arg(data.join("manifest.json"))
        .arg("--output")
        .arg(&run)
        .args(["--iterations", "30", "--burn-in", "10"]));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("pinned"), "stderr was: {stderr}");

    let summary = tmp.path().join("summary");
    run_ok(bin()
        .arg("summarize")
        .arg(data.join("manifest.json"))
        .arg(run.join("trace_chain0.jsonl"))
        .arg("--output")
        .arg(&summary));
}

#[test]
fn corrupt_inputs_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path());

    // Break one matrix so it no longer matches its undirected flag.
    let net = data.join("net0.csv");
    let mut rows: Vec<Vec<String>> = fs::read_to_string(&net)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    rows[0][1] = "1".into();
    rows[1][0] = "0".into();
    let text = rows
        .iter()
        .map(|r| r.join(","))
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&net, text).unwrap();

    let out = bin()
        .arg("fit")
        .arg(data.join("manifest.json"))
        .arg("--output")
        .arg(tmp.path().join("run"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("network 0"), "stderr was: {stderr}");
}

//! CLI acceptance: bit-exact reproducibility of every output file from
//! (config, seed) regardless of worker count, plus exit-code and config
//! round-trip behavior.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use twinbeam_cli::config::{ScenarioConfig, ScenarioKind};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_twinbeam")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("twinbeam_accept_{}_{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(cfg: &ScenarioConfig, dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_json()).unwrap();
    path
}

/// Returns every output file's bytes, keyed by relative name.
fn read_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            out.insert(
                entry.file_name().to_string_lossy().to_string(),
                std::fs::read(entry.path()).unwrap(),
            );
        }
    }
    out
}

fn run_with_threads(config: &Path, out: &Path, threads: &str) {
    let status = Command::new(bin())
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RAYON_NUM_THREADS", threads)
        .status()
        .unwrap();
    assert!(status.success(), "run failed with threads={threads}");
}

#[test]
fn criterion_9_bit_identical_outputs_across_runs_and_worker_counts() {
    let dir = tmp_dir("det");
    let mut cfg = ScenarioConfig::default_for(ScenarioKind::Fig4Covariance);
    // 1000 drive-locked segments: enough for the significance checks while
    // keeping four full runs cheap
    cfg.trace.n_samples = 500_000;
    cfg.trace.seed = 4242;
    cfg.sweep.phases_deg = vec![0.0, 180.0];
    let config = write_config(&cfg, &dir, "config.json");

    // identical config + seed + output path, varying only the worker count;
    // each run overwrites the same directory and is snapshotted in between
    let out = dir.join("out");
    let mut snapshots = Vec::new();
    for threads in ["1", "1", "4", "2"] {
        run_with_threads(&config, &out, threads);
        snapshots.push((threads, read_outputs(&out)));
    }
    let (_, reference) = &snapshots[0];
    assert!(reference.len() >= 10, "expected a full output bundle");
    let mut pass = true;
    for (threads, snap) in &snapshots[1..] {
        if snap.len() != reference.len() {
            pass = false;
        }
        for (name, bytes) in reference {
            if snap.get(name) != Some(bytes) {
                pass = false;
                eprintln!("file {name} differs for threads={threads}");
            }
        }
    }
    println!(
        "ACCEPTANCE 9 (bit-identical outputs, worker-count independent): {} - {} files x {} runs",
        if pass { "PASS" } else { "FAIL" },
        reference.len(),
        snapshots.len()
    );
    assert!(pass);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_round_trip_is_stable() {
    for kind in ScenarioKind::ALL {
        let cfg = ScenarioConfig::default_for(kind);
        let json = cfg.to_json();
        let back = ScenarioConfig::from_json(&json).unwrap();
        assert_eq!(back.to_json(), json, "{kind:?} round trip changed the config");
    }
}

#[test]
fn validate_reports_field_errors_with_exit_1() {
    let dir = tmp_dir("val");
    let mut cfg = ScenarioConfig::default_for(ScenarioKind::AnalyticTable);
    cfg.source.gain = 0.2;
    let config = write_config(&cfg, &dir, "bad.json");
    let output = Command::new(bin())
        .args(["validate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("source"), "stderr: {stderr}");

    // a good config validates with exit 0
    let good = write_config(
        &ScenarioConfig::default_for(ScenarioKind::AnalyticTable),
        &dir,
        "good.json",
    );
    let status = Command::new(bin())
        .args(["validate", "--config"])
        .arg(&good)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let output = Command::new(bin())
        .args(["print-config", "--scenario", "fig9_nope"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn unwritable_output_path_exits_3() {
    let dir = tmp_dir("io");
    let cfg = ScenarioConfig::default_for(ScenarioKind::AnalyticTable);
    let config = write_config(&cfg, &dir, "cfg.json");
    // a regular file where the output directory should go
    let blocker = dir.join("blocked");
    std::fs::write(&blocker, b"not a directory").unwrap();
    let output = Command::new(bin())
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn print_config_output_parses_and_runs() {
    let dir = tmp_dir("pc");
    let output = Command::new(bin())
        .args(["print-config", "--scenario", "analytic_table"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let json = String::from_utf8(output.stdout).unwrap();
    let cfg = ScenarioConfig::from_json(&json).unwrap();
    assert_eq!(cfg.scenario, ScenarioKind::AnalyticTable);

    let config = write_config(&cfg, &dir, "at.json");
    let out = dir.join("out");
    let status = Command::new(bin())
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let table = std::fs::read_to_string(out.join("analytic_table.csv")).unwrap();
    assert!(table.starts_with("m_p,m_c,phi_deg,joint_noise,joint_noise_db\n"));
    // the unmodulated row carries the baseline squeezing value
    assert!(
        table.contains("1.010205144336e-1"),
        "baseline row missing: {}",
        table.lines().take(3).collect::<Vec<_>>().join(" | ")
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn seed_override_changes_hash_and_outputs() {
    let dir = tmp_dir("seed");
    let mut cfg = ScenarioConfig::default_for(ScenarioKind::Fig2Sweep);
    cfg.trace.n_samples = 50_000;
    cfg.sweep.theta_grid_deg = vec![0.0, 90.0];
    let config = write_config(&cfg, &dir, "f2.json");

    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for (out, seed) in [(&out_a, "7"), (&out_b, "8")] {
        let status = Command::new(bin())
            .args(["run", "--config"])
            .arg(&config)
            .args(["--seed", seed])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read_to_string(out_a.join("sweep.csv")).unwrap();
    let b = std::fs::read_to_string(out_b.join("sweep.csv")).unwrap();
    assert_ne!(a, b, "different seeds must change the Monte-Carlo columns");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn shot_calibrate_writes_flat_reference() {
    let dir = tmp_dir("shot");
    let mut cfg = ScenarioConfig::default_for(ScenarioKind::Fig3bRelativePhase);
    cfg.trace.n_samples = 200_000;
    let config = write_config(&cfg, &dir, "cfg.json");
    let out = dir.join("out");
    let status = Command::new(bin())
        .args(["shot-calibrate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("shot_reference.csv")).unwrap();
    assert!(csv.starts_with("freq_hz,psd_rel_shot,stderr\n"));
    assert!(csv.lines().count() > 200);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exported_traces_feed_dsp_only_runs() {
    let dir = tmp_dir("imp");
    let mut cfg = ScenarioConfig::default_for(ScenarioKind::Fig3bRelativePhase);
    cfg.trace.n_samples = 200_000;
    let config = write_config(&cfg, &dir, "cfg.json");

    let traces_dir = dir.join("traces");
    let status = Command::new(bin())
        .args(["export-traces", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&traces_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(traces_dir.join("traces.f64").exists());
    assert!(traces_dir.join("traces.json").exists());

    // DSP-only run from the recorded traces
    cfg.trace_import = Some(traces_dir.join("traces").display().to_string());
    let config = write_config(&cfg, &dir, "cfg_import.json");
    let out = dir.join("out");
    let status = Command::new(bin())
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0), "DSP-only run failed");
    assert!(out.join("spectrum_phi180.csv").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn summary_reflects_checks_and_metadata_lists_files() {
    let dir = tmp_dir("sum");
    let mut cfg = ScenarioConfig::default_for(ScenarioKind::Fig3aSingleEom);
    cfg.trace.n_samples = 400_000;
    let config = write_config(&cfg, &dir, "cfg.json");
    let out = dir.join("out");
    let status = Command::new(bin())
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("RESULT: PASS"));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    let files = meta["files"].as_array().unwrap();
    for f in files {
        assert!(out.join(f.as_str().unwrap()).exists(), "missing {f}");
    }
    assert!(meta["config_hash"].as_str().unwrap().len() == 16);
    std::fs::remove_dir_all(&dir).ok();
}

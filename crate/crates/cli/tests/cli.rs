//! The `snell` binary: exit codes, output files and verdicts.

use std::collections::BTreeSet;
use std::fs;
use std::process::{Command, Output};

use snell_cli::config::ExperimentConfig;

const CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");

fn snell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snell")).args(args).output().unwrap()
}

#[test]
fn negative_budget_is_a_specification_error() {
    let out = snell(&["solve-game", "--fixture", "f1", "--k", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid specification"));
}

#[test]
fn unknown_fixture_is_an_error() {
    let out = snell(&["solve-bsde", "--fixture", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn game_writes_csv_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("game.csv");
    let status = snell(&["solve-game", "--config", &format!("{CONFIGS}/f1.json"), "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("eps,k,n_steps,lower_value,upper_value,gap,runtime_ms,seed"));
    assert_eq!(lines.count(), 1);
    let verdict: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("game.verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["command"], "solve-game");
    assert_eq!(verdict["passed"], true);
    let config = ExperimentConfig::load(format!("{CONFIGS}/f1.json").as_ref()).unwrap();
    assert_eq!(verdict["config_hash"].as_str().unwrap().len(), 64);
    assert_ne!(verdict["config_hash"], config.hash(), "the output path is part of the hashed config");
}

#[test]
fn failed_checks_exit_with_one() {
    // Y^32 and the k = 3 game differ by more than the tolerance here.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp.csv");
    let status = snell(&["compare", "--fixture", "reward-flow", "--out", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(1));
    let verdict: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("cmp.verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["passed"], false);
}

#[test]
fn bsde_sweep_and_single_level() {
    let sweep = snell(&["solve-bsde", "--config", &format!("{CONFIGS}/lookback.json")]);
    assert!(sweep.status.success());
    assert_eq!(String::from_utf8_lossy(&sweep.stdout).lines().count(), 12);
    let one = snell(&["solve-bsde", "--fixture", "reward-flow", "--n", "8"]);
    assert!(one.status.success());
    let text = String::from_utf8_lossy(&one.stdout).to_string();
    assert!(text.lines().nth(1).unwrap().starts_with("8,0.418181818181818"));
    assert_eq!(snell(&["solve-bsde", "--n", "lots"]).status.code(), Some(2));
}

#[test]
fn saddle_and_sweep_and_simulate_run() {
    let saddle = snell(&["verify-saddle", "--fixture", "reward-flow", "--probes", "5"]);
    assert!(saddle.status.success());
    assert_eq!(String::from_utf8_lossy(&saddle.stdout).lines().count(), 6);

    let sweep = snell(&["sweep", "--config", &format!("{CONFIGS}/truncation-sweep.json")]);
    assert!(sweep.status.success());
    assert!(String::from_utf8_lossy(&sweep.stdout).contains("k,8,lower_value,0\n"));

    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("paths.csv");
    let sim = snell(&["simulate", "--fixture", "f1", "--paths", "4", "--dump-paths", dump.to_str().unwrap()]);
    assert!(sim.status.success());
    let dumped = fs::read_to_string(&dump).unwrap();
    assert!(dumped.starts_with("path_id,time,state,jump,mark\n"));
}

#[test]
fn sample_configs_load() {
    for entry in fs::read_dir(CONFIGS).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap() == "schema.json" {
            continue;
        }
        ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
    }
}

#[test]
fn schema_lists_every_config_field() {
    let schema: serde_json::Value = serde_json::from_str(&fs::read_to_string(format!("{CONFIGS}/schema.json")).unwrap()).unwrap();
    let keys = |v: &serde_json::Value| v.as_object().unwrap().keys().cloned().collect::<BTreeSet<_>>();
    let config = serde_json::to_value(ExperimentConfig::default()).unwrap();
    assert_eq!(keys(&schema["properties"]), keys(&config));
    assert_eq!(keys(&schema["properties"]["tolerances"]["properties"]), keys(&config["tolerances"]));
    let fixtures: BTreeSet<String> =
        schema["properties"]["fixture"]["enum"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    assert_eq!(fixtures, snell_core::fixtures::NAMES.iter().map(|s| s.to_string()).collect());
}

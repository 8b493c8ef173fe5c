use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sset-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn sset(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sset")).args(args).env("SSET_OUT", out_root).output().unwrap()
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    let config = json!({
        "name": "cli",
        "env": { "kind": "three-room" },
        "learner": { "kind": "tabular", "gamma": 0.99, "epsilon": 0.3, "batch": 8, "refresh_rate": 0.01, "alpha": 0.1 },
        "sampler": { "kind": "sset", "capacity": 1000, "events": [{ "predicate": "done", "tau": 20, "eta": 0.3 }] },
        "seeds": [0, 1, 2],
        "epochs": 2,
        "steps_per_epoch": 50,
        "updates_per_epoch": 50
    });
    fs::write(&path, config.to_string()).unwrap();
    path
}

#[test]
fn run_uses_the_output_root_and_overrides() {
    let dir = tmp("run");
    let config = write_config(&dir);
    let out = sset(&["run", "--config", config.to_str().unwrap(), "--seeds", "4", "--sampler", "uniform"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = fs::read_to_string(dir.join("cli").join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
    assert!(metrics.lines().skip(2).all(|l| l.starts_with("cli-s4,4,")));
    let echoed = fs::read_to_string(dir.join("cli").join("config.json")).unwrap();
    assert!(echoed.contains("\"uniform\""));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tmp("config-error");
    let path = dir.join("bad.json");
    fs::write(&path, r#"{"name": "x", "surprise": 1}"#).unwrap();
    let out = sset(&["run", "--config", path.to_str().unwrap()], &dir);
    assert_eq!(out.status.code(), Some(2));

    let config = write_config(&dir);
    let out = sset(&["run", "--config", config.to_str().unwrap(), "--sampler", "fancy"], &dir);
    assert_eq!(out.status.code(), Some(2));
    let out = sset(&["sweep", "--config", config.to_str().unwrap(), "--axis", "learner.nothing", "--values", "1"], &dir);
    assert_eq!(out.status.code(), Some(2));
    let out = sset(&["run", "--config", dir.join("missing.json").to_str().unwrap()], &dir);
    assert_eq!(out.status.code(), Some(2));
    let out = sset(&["verify-theory", "--suite", "lemma9"], &dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn summarize_without_metrics_exits_with_three() {
    let dir = tmp("empty");
    let out = sset(&["summarize", "--in", dir.to_str().unwrap()], &dir);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_then_summarize() {
    let dir = tmp("sweep");
    let config = write_config(&dir);
    let out = sset(&["sweep", "--config", config.to_str().unwrap(), "--axis", "learner.alpha", "--values", "0.1,0.5"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.join("cli-sweep");
    assert!(root.join("learner.alpha=0.5").join("metrics.csv").exists());
    let out = sset(&["summarize", "--in", root.to_str().unwrap()], &dir);
    assert!(out.status.success());
    let summary = fs::read_to_string(root.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
}

#[test]
fn verify_theory_single_suite() {
    let dir = tmp("theory");
    let out = sset(&["verify-theory", "--suite", "lambert"], &dir);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().filter(|l| l.starts_with("PASS [lambert]")).count() == 4, "{text}");
}

#[test]
fn forgetting_eval_writes_checkpoints() {
    let dir = tmp("forgetting");
    let config = write_config(&dir);
    let out = sset(&["forgetting-eval", "--config", config.to_str().unwrap(), "--every", "1", "--seeds", "0,1"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("cli-forgetting").join("forgetting.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("epoch,successes,episodes,seeds,per_seed"));
    assert_eq!(csv.lines().count(), 4);
}

use std::fs;
use std::path::PathBuf;

use serde_json::json;
use sset_harness::metrics::strip_wall_time;
use sset_harness::{forgetting_eval, read_metrics, run, run_seed, summarize, sweep, ExperimentConfig, SamplerKind};

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sset-harness-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn tabular(sampler: &str, epochs: usize) -> ExperimentConfig {
    ExperimentConfig::from_json(
        &json!({
            "name": "small",
            "env": { "kind": "three-room" },
            "learner": { "kind": "tabular", "gamma": 0.99, "epsilon": 0.3, "batch": 8, "refresh_rate": 0.01, "alpha": 0.1 },
            "sampler": { "kind": sampler, "capacity": 2000, "events": [
                { "predicate": "at-gap", "tau": 50, "eta": 0.2 },
                { "predicate": "done", "tau": 50, "eta": 0.3 }
            ] },
            "seeds": [0, 1],
            "epochs": epochs,
            "steps_per_epoch": 100,
            "updates_per_epoch": 100
        })
        .to_string(),
    )
    .unwrap()
}

#[test]
fn single_epoch_gives_one_row_per_seed() {
    let mut config = tabular("sset", 1);
    config.seeds = vec![0];
    let out = tmp("single");
    let result = run(&config, &out).unwrap();
    assert_eq!(result.rows.len(), 1);
    let text = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(text.starts_with("# sset-metrics v1\n"));
    assert_eq!(text.lines().count(), 3, "marker, header and one row");
    let row = &result.rows[0];
    assert_eq!((row.seed, row.epoch, row.status.as_str()), (0, 1, "ok"));
    assert!(row.eval_return.is_some(), "the last epoch is always evaluated");
    assert_eq!(row.table_sizes.split(';').count(), 3);
}

#[test]
fn runs_are_reproducible() {
    let config = tabular("sset-per", 3);
    let a = run(&config, &tmp("repro-a")).unwrap();
    let b = run(&config, &tmp("repro-b")).unwrap();
    let text = |o: &sset_harness::RunOutput| strip_wall_time(&fs::read_to_string(o.dir.join("metrics.csv")).unwrap());
    assert_eq!(text(&a), text(&b));
    assert_eq!(a.rows.iter().map(|r| (r.seed, r.epoch)).collect::<Vec<_>>(), vec![(0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3)]);
}

#[test]
fn seeds_are_independent_of_the_seed_list() {
    let config = tabular("uniform", 2);
    let mut alone = config.clone();
    alone.seeds = vec![1];
    let together = run(&config, &tmp("together")).unwrap();
    let single = run_seed(&alone, 1).unwrap();
    let from_pair: Vec<_> = together.rows.iter().filter(|r| r.seed == 1).collect();
    for (a, b) in from_pair.iter().zip(&single) {
        assert_eq!((a.episodic_return, a.eval_return, a.sum_q), (b.episodic_return, b.eval_return, b.sum_q));
    }
}

#[test]
fn zero_event_tables_match_uniform() {
    let mut sset = tabular("sset", 4);
    sset.sampler.events.clear();
    let mut uniform = sset.clone();
    uniform.sampler.kind = SamplerKind::Uniform;
    let a = run(&sset, &tmp("degenerate-sset")).unwrap();
    let b = run(&uniform, &tmp("degenerate-uniform")).unwrap();
    let text = |o: &sset_harness::RunOutput| strip_wall_time(&fs::read_to_string(o.dir.join("metrics.csv")).unwrap());
    assert_eq!(text(&a), text(&b));
}

#[test]
fn every_sampler_and_env_runs() {
    for sampler in ["uniform", "per", "sset", "sset-per", "reverse-sweep"] {
        let mut config = tabular(sampler, 2);
        config.seeds = vec![3];
        let rows = run_seed(&config, 3).unwrap();
        assert!(rows.iter().all(|r| r.status == "ok"), "{sampler}: {:?}", rows.last().map(|r| &r.status));
    }
    for env in [json!({ "kind": "shaping-rooms", "shaping": "gap" }), json!({ "kind": "skill" }), json!({ "kind": "obstacle-course" })] {
        let config = tabular("sset", 1).with_path("env", env.clone()).unwrap();
        let config = config.with_path("seeds", json!([0])).unwrap();
        let rows = run_seed(&config, 0).unwrap();
        assert_eq!(rows[0].status, "ok", "{env}");
        if env["kind"] == "skill" {
            assert!(rows[0].scenario_returns.contains('='), "skill eval reports per-scenario returns");
        }
    }
}

#[test]
fn ddqn_runs_and_reports_no_table_sum() {
    let config = tabular("sset", 2)
        .with_path("learner", json!({ "kind": "ddqn", "gamma": 0.99, "epsilon": 0.3, "batch": 8, "refresh_rate": 0.01, "learning_rate": 0.001, "hidden": [16] }))
        .unwrap();
    let rows = run_seed(&config, 0).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.status == "ok" && r.sum_q.is_none()));
}

#[test]
fn unknown_keys_are_rejected() {
    let mut value: serde_json::Value = serde_json::from_str(&tabular("sset", 1).to_json()).unwrap();
    value["sampler"]["capacityy"] = json!(5);
    let err = ExperimentConfig::from_json(&value.to_string()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("capacityy"), "{err}");
}

#[test]
fn invalid_values_are_rejected() {
    let base = tabular("sset", 1);
    for (path, value) in [
        ("learner.gamma", json!(1.0)),
        ("sampler.events.0.eta", json!(0.8)),
        ("sampler.events.0.predicate", json!("at-nowhere")),
        ("seeds", json!([])),
        ("learner.alpha", json!(null)),
    ] {
        let err = base.with_path(path, value.clone()).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{path} = {value}");
    }
}

#[test]
fn sweep_writes_one_run_per_value() {
    let out = tmp("sweep");
    let points = sweep(&tabular("sset", 2), "sampler.events.0.eta", &[json!(0.1), json!(0.3)], &out).unwrap();
    assert_eq!(points.iter().map(|p| p.label.as_str()).collect::<Vec<_>>(), ["0.1", "0.3"]);
    assert!(points.iter().all(|p| p.final_epoch == 2 && p.failures == 0));
    let echoed = ExperimentConfig::load(&out.join("sampler.events.0.eta=0.3").join("config.json")).unwrap();
    assert_eq!(echoed.sampler.events[0].eta, 0.3);
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 3);
}

#[test]
fn bad_sweep_axis_fails_before_running() {
    let out = tmp("bad-sweep");
    let err = sweep(&tabular("sset", 1), "sampler.nope", &[json!(1)], &out).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!out.exists());
}

#[test]
fn summarize_aggregates_every_metrics_file() {
    let out = tmp("summary");
    run(&tabular("sset", 2), &out.join("a")).unwrap();
    run(&tabular("uniform", 2), &out.join("b")).unwrap();
    let rows = summarize(&out).unwrap();
    assert_eq!(rows.len(), 4);
    let first = &rows[0];
    assert_eq!(first.epoch, 1);
    let stat = first.sum_q.unwrap();
    assert_eq!(stat.n, 2);
    let metrics = read_metrics(&out.join("a").join("metrics.csv")).unwrap();
    let values: Vec<f64> = metrics.iter().filter(|r| r.epoch == 1).filter_map(|r| r.sum_q).collect();
    assert!((stat.mean - (values[0] + values[1]) / 2.0).abs() < 1e-12);
    assert!(out.join("summary.csv").exists());
}

#[test]
fn summarize_rejects_foreign_csv() {
    let out = tmp("foreign");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("metrics.csv"), "a,b\n1,2\n").unwrap();
    assert!(summarize(&out).is_err());
}

#[test]
fn forgetting_checkpoints_follow_the_cadence() {
    let mut config = tabular("sset", 4);
    config.eval.every = 2;
    let out = tmp("forgetting");
    let (checkpoints, _) = forgetting_eval(&config, Some(&out)).unwrap();
    assert_eq!(checkpoints.iter().map(|c| c.epoch).collect::<Vec<_>>(), [0, 2, 4]);
    assert_eq!(checkpoints[0].successes, 0, "an untrained agent does not reach the goal");
    assert!(checkpoints.iter().all(|c| c.episodes == 2 && c.per_seed.len() == 2));
    let echoed = ExperimentConfig::load(&out.join("config.json")).unwrap();
    assert_eq!(echoed.eval.start, Some([1, 4, 0]));
    assert_eq!(fs::read_to_string(out.join("forgetting.csv")).unwrap().lines().count(), 4);
}

#[test]
fn shipped_configs_validate() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 4);
}

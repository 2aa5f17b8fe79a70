use std::fs;
use std::path::Path;
use std::process::Command;

use mogfn_cli::io::blob_hash;
use mogfn_cli::{compare_runs, parse_config_str, run_experiment, Summary};

const GRID: &str = r#"{
    "task": "hypergrid", "method": "mogfn_pc", "seed": 1,
    "hypergrid": {"side": 4},
    "train": {"steps": 40, "batch_size": 16, "hidden": [16]},
    "eval": {"preferences": 4, "samples": 16, "k": 4, "interval": 20}
}"#;

fn summary(dir: &Path) -> Summary {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn jsonl(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn exact_check_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse_config_str(GRID).unwrap();
    cfg.eval.exact_check = true;
    let s = run_experiment(&cfg, dir.path()).unwrap();
    for f in ["config.json", "test_preferences.json", "train_log.jsonl", "truth_front.csv", "candidates.csv", "front.csv", "metrics.csv", "checkpoint.json", "summary.json"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let gap = s.l1_gap.unwrap();
    assert!(gap.is_finite() && gap >= 0.0);
    assert_eq!(s.l1_gap_by_preference.as_ref().unwrap().len(), 4);
    assert_eq!(s.front_hash, blob_hash(&fs::read(dir.path().join("front.csv")).unwrap()));
    assert_eq!(s.config_hash, cfg.hash());
    assert!(s.metrics.gd_plus.unwrap() >= 0.0);
    assert_eq!(summary(dir.path()), s);

    let rows = jsonl(&dir.path().join("train_log.jsonl"));
    assert_eq!(rows.len(), 40);
    assert!(rows[19].get("hv").is_some() && rows[19].get("l1_gap").is_some());
    assert!(rows[18].get("hv").is_none());
    let prefs: Vec<Vec<f64>> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("test_preferences.json")).unwrap()).unwrap();
    let expected = [[1.0, 0.0], [2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0], [0.0, 1.0]];
    assert_eq!(prefs.len(), expected.len());
    for (p, e) in prefs.iter().zip(expected) {
        assert!(p.iter().zip(e).all(|(a, b)| (a - b).abs() < 1e-15), "{p:?}");
    }
    let stored = parse_config_str(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(stored, cfg);
}

#[test]
fn ngrams_runs_log_metric_rows_per_interval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(
        r#"{"task": "ngrams", "method": "moreinforce", "ngrams": {"max_len": 6},
            "reinforce": {"steps": 30, "batch_size": 8, "hidden": [16]},
            "eval": {"preferences": 3, "samples": 12, "k": 4, "interval": 10}}"#,
    )
    .unwrap();
    run_experiment(&cfg, dir.path()).unwrap();
    let rows = jsonl(&dir.path().join("train_log.jsonl"));
    let with_metrics: Vec<u64> =
        rows.iter().filter(|r| r.get("topk_diversity").is_some()).map(|r| r["step"].as_u64().unwrap()).collect();
    assert_eq!(with_metrics, vec![10, 20, 30]);
    assert!(summary(dir.path()).metrics.gd_plus.is_none());
}

#[test]
fn al_runs_record_the_relative_hypervolume_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(
        r#"{"task": "al", "method": "mogfn_al", "seed": 2,
            "ngrams": {"alphabet": "ABCD", "max_len": 8, "patterns": ["AB", "BC"]},
            "al": {"alphabet": "ABCD", "seq_len": 8, "initial_size": 8, "rounds": 2, "batch_size": 4,
                   "num_proposals": 8,
                   "surrogate": {"members": 2, "hidden": [8], "epochs": 20, "lr": 0.01, "seed": 0},
                   "proposer": {"max_mutations": 2, "steps": 10, "batch_size": 8, "lr": 0.001, "lr_z": 0.01,
                                "delta": 0.05, "hidden": [16]}},
            "eval": {"k": 4}}"#,
    )
    .unwrap();
    let s = run_experiment(&cfg, dir.path()).unwrap();
    let rel = s.relative_hv.unwrap();
    assert_eq!(rel.len(), 3);
    assert_eq!(rel[0], 1.0);
    assert!(rel.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(s.oracle_calls, Some(16));
    let rounds = jsonl(&dir.path().join("rounds.jsonl"));
    assert_eq!(rounds.len(), 3);
    for r in &rounds {
        assert!(dir.path().join(r["front"].as_str().unwrap()).is_file());
    }
}

#[test]
fn compare_tabulates_config_deltas() {
    let root = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for (name, beta) in [("a", 1.0), ("b", 1.0), ("c", 2.0)] {
        let mut cfg = parse_config_str(GRID).unwrap();
        cfg.train.as_mut().unwrap().beta = beta;
        let d = root.path().join(name);
        run_experiment(&cfg, &d).unwrap();
        dirs.push(d);
    }
    let table = compare_runs(&dirs).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "run,train.beta,hv,r2,gd_plus,topk_reward,topk_diversity");
    assert_eq!(lines[1][1..], lines[2][1..]);
    assert!(lines[3].starts_with("c,2.0,"));
    assert!(compare_runs(&[dirs[0].clone(), root.path().join("missing")]).is_err());

    let other = root.path().join("other");
    let mut cfg = parse_config_str(GRID).unwrap();
    cfg.eval.k = 3;
    run_experiment(&cfg, &other).unwrap();
    assert!(compare_runs(&[dirs[0].clone(), other]).is_err());
}

#[test]
fn binary_runs_and_reports_metrics() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("grid.json");
    fs::write(&config, GRID).unwrap();
    let bin = env!("CARGO_BIN_EXE_mogfn");
    let out = root.path().join("run");
    let status = Command::new(bin)
        .args(["train-pc", "--config"])
        .arg(&config)
        .args(["--seed", "5", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(summary(&out).seed, 5);

    let res = Command::new(bin)
        .arg("metrics")
        .arg("--front")
        .arg(out.join("front.csv"))
        .arg("--truth")
        .arg(out.join("truth_front.csv"))
        .arg("--candidates")
        .arg(out.join("candidates.csv"))
        .args(["--k", "4", "--preferences", "4"])
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let printed = String::from_utf8(res.stdout).unwrap();
    let written = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(printed.lines().nth(1), written.lines().nth(1));

    let bad = Command::new(bin).args(["train-rl", "--config"]).arg(&config).arg("--out").arg(&out).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("moreinforce"));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "\
reference_sample_size: 2000
generator:
  n_windows: 330
";

fn dqscore(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("engine.yaml");
    if !config.exists() {
        fs::write(&config, CONFIG).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_dqscore"))
        .arg("--config")
        .arg(&config)
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    ok(&dqscore(dir.path(), &["gen", "--out", "a.csv", "--seed", "3"]));
    ok(&dqscore(dir.path(), &["gen", "--out", "b.csv", "--seed", "3"]));
    ok(&dqscore(dir.path(), &["gen", "--out", "c.csv", "--seed", "4"]));
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert!(a.starts_with("timestamp,value\n"));
    assert_eq!(a.lines().count(), 1 + 330 * 200);
    assert_eq!(a, fs::read_to_string(dir.path().join("b.csv")).unwrap());
    assert_ne!(a, fs::read_to_string(dir.path().join("c.csv")).unwrap());
}

#[test]
fn develop_then_run_scores_every_window() {
    let dir = tempfile::tempdir().unwrap();
    let summary = ok(&dqscore(dir.path(), &["develop", "--store", "store"]));
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["version"], 1);
    assert_eq!(fs::read_to_string(dir.path().join("store/LATEST")).unwrap().trim(), "1");

    ok(&dqscore(dir.path(), &["gen", "--out", "stream.csv", "--seed", "9"]));
    let lines = ok(&dqscore(
        dir.path(),
        &["run", "--mode", "standard", "--store", "store", "--input", "stream.csv"],
    ));
    let lines: Vec<serde_json::Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 330);
    assert!(lines.iter().all(|l| l["provenance"] == "standard" && l["model_version"] == 1));
    assert!(lines.iter().all(|l| l["score"].is_f64()));
}

#[test]
fn mutate_writes_stream_and_ledger() {
    let dir = tempfile::tempdir().unwrap();
    ok(&dqscore(dir.path(), &["gen", "--out", "stream.csv"]));
    let out = dqscore(
        dir.path(),
        &["mutate", "--input", "stream.csv", "--out", "mutated.csv", "--ledger", "faults.jsonl"],
    );
    ok(&out);
    let mutated = fs::read_to_string(dir.path().join("mutated.csv")).unwrap();
    assert_eq!(mutated.lines().count(), 1 + 330 * 200);
    let ledger = fs::read_to_string(dir.path().join("faults.jsonl")).unwrap();
    assert!(ledger.lines().count() > 0);
    assert_ne!(mutated, fs::read_to_string(dir.path().join("stream.csv")).unwrap());
}

#[test]
fn sweep_counts_grow_with_tau() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&dqscore(dir.path(), &["sweep", "--taus", "0.01,0.05,0.2"]));
    let rows: Vec<serde_json::Value> = serde_json::from_str(&out).unwrap();
    let counts: Vec<u64> = rows.iter().map(|r| r["detections"].as_u64().unwrap()).collect();
    assert_eq!(counts.len(), 3);
    assert!(counts.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn bench_writes_one_report_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let table = ok(&dqscore(dir.path(), &["bench", "--variants", "standard,frozen", "--out", "reports"]));
    assert_eq!(table.lines().count(), 3);
    for name in ["standard", "frozen"] {
        let csv = fs::read_to_string(dir.path().join(format!("reports/{name}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1 + 30);
        assert!(dir.path().join(format!("reports/{name}.summary.json")).exists());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.yaml"), "drift:\n  tau: 2.0\n").unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_dqscore"))
        .args(["--config", "bad.yaml", "gen"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(dqscore(dir.path(), &["run", "--mode", "sideways", "--store", "s"]).status.code(), Some(1));
    assert_eq!(dqscore(dir.path(), &["develop"]).status.code(), Some(1));

    // No bundle in the store yet.
    fs::write(dir.path().join("empty.csv"), "timestamp,value\n0,1.0\n").unwrap();
    let missing = dqscore(dir.path(), &["run", "--store", "nowhere", "--input", "empty.csv"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("LATEST"));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "window_seconds": 8.0,
  "overlap": 0.5,
  "mlp": { "max_epochs": 30 },
  "synth": { "subjects": 7, "block_seconds": 48.0, "repeats": 1 }
}"#;

fn affect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affect"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn invalid_usage_and_config_exit_with_2() {
    assert_eq!(affect(&[]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{ "purity": 1.5 }"#).unwrap();
    let out = affect(&["--config", path(&cfg), "--out", path(dir.path()), "train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("purity"));

    fs::write(&cfg, r#"{ "window_secs": 8 }"#).unwrap();
    assert_eq!(affect(&["--config", path(&cfg), "train"]).status.code(), Some(2));
    assert_eq!(affect(&["extract"]).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = affect(&["--out", path(dir.path()), "train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("features.csv"));
    let missing = dir.path().join("missing");
    let out = affect(&["--data", path(&missing), "--out", path(dir.path()), "extract"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn staged_run_on_synthetic_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    fs::write(&cfg, SMALL).unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    let common = ["--config", path(&cfg), "--data", path(&data), "--out", path(&out)];

    let synth = affect(&["--config", path(&cfg), "--out", path(&data), "synth", "--subjects", "7"]);
    assert!(synth.status.success(), "{}", String::from_utf8_lossy(&synth.stderr));
    assert_eq!(fs::read_dir(&data).unwrap().count(), 7);

    for stage in ["extract", "train", "evaluate"] {
        let r = affect(&[&common[..], &[stage]].concat());
        assert!(r.status.success(), "{stage}: {}", String::from_utf8_lossy(&r.stderr));
    }
    for file in ["features.csv", "report.json", "sizes.csv", "teams.csv", "fusion_audit.jsonl"] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
    fs::remove_file(out.join("sizes.csv")).unwrap();
    let r = affect(&["--out", path(&out), "report"]);
    assert!(r.status.success());
    assert!(out.join("sizes.csv").is_file());
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("cases") && stdout.contains("ECG replaced by noise"));
}

#[test]
fn all_with_synthetic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("run");
    let r = affect(&["--config", path(&cfg), "--out", path(&out), "--seed", "3", "all", "--synthetic"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("data").join("S01").is_dir());
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"seed\": 3"));
}

use std::path::Path;
use std::process::{Command, Output};

use easp_cli::catalog::CATALOG;

fn easp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_easp")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "name = small
base_seed = 11
trials = 20
horizon = 300
predictor = rational_threshold
loss = threshold_label
settle_step = 200
min_settled_fraction = 0.9
model.kind = threshold
model.a = 0.5
model.rational = true
";

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", &SMALL.replace("trials = 20", "trials = many"));
    let out = easp(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("trials") && err.contains(":3:"), "{err}");
}

#[test]
fn missing_seed_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "noseed.cfg", &SMALL.replace("base_seed = 11\n", ""));
    let out = easp(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("base_seed"));
}

#[test]
fn oracle_suites() {
    assert_eq!(easp(&["oracle", "nope"]).status.code(), Some(2));
    let out = easp(&["oracle", "tv", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["violations"], 0);
}

#[test]
fn list_covers_the_catalog() {
    let out = easp(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for id in ["cover_predictor", "markov_regeneration", "property_bit", "heavy_tail"] {
        assert!(text.contains(id), "{id} missing");
    }
    assert!(text.ends_with(&format!("{} entries\n", CATALOG.len())));
    assert_eq!(text.lines().count(), CATALOG.len() + 1);
}

#[test]
fn rerun_is_byte_identical_and_thread_count_does_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL);
    let outs: Vec<_> = ["1", "1", "3"]
        .iter()
        .enumerate()
        .map(|(i, threads)| {
            let out = dir.path().join(format!("out{i}"));
            let status = Command::new(env!("CARGO_BIN_EXE_easp"))
                .env("EASP_THREADS", threads)
                .args(["run", &cfg, "--out", out.to_str().unwrap()])
                .output()
                .unwrap()
                .status;
            assert_eq!(status.code(), Some(0));
            out
        })
        .collect();
    for file in ["small_trials.csv", "small_summary.json"] {
        let first = std::fs::read(outs[0].join(file)).unwrap();
        for o in &outs[1..] {
            assert_eq!(first, std::fs::read(o.join(file)).unwrap(), "{file}");
        }
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(outs[0].join("small_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    let csv = std::fs::read_to_string(outs[0].join("small_trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn overrides_and_failing_gate() {
    let dir = tempfile::tempdir().unwrap();
    // The irrational threshold cannot settle, so the gate fails.
    let cfg = write(
        dir.path(),
        "fail.cfg",
        &SMALL.replace(
            "model.a = 0.5\nmodel.rational = true",
            "model.a = 0.7071067811865476\nmodel.rational = false",
        ),
    );
    let out = easp(&[
        "run",
        &cfg,
        "--trials",
        "5",
        "--horizon",
        "2000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("small_summary.json")).unwrap()).unwrap();
    assert_eq!(
        (summary["trials"].as_u64(), summary["horizon"].as_u64()),
        (Some(5), Some(2000))
    );
    assert_eq!(summary["pass"], false);
}

#[test]
fn bad_thread_count() {
    let out = Command::new(env!("CARGO_BIN_EXE_easp"))
        .env("EASP_THREADS", "0")
        .arg("list")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

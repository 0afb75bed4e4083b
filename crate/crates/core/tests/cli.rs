use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use hme_core::ink::write_inkml;
use hme_core::srt::to_lg;
use hme_core::synth::{render, showcase};

fn hme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hme")).args(args).output().expect("running hme")
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "hme failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Write showcase layout `idx` as InkML plus LG into `dir`.
fn write_showcase(dir: &Path, idx: usize) -> PathBuf {
    let (id, layout) = &showcase()[idx];
    let sample = render(id, layout, 0.02, 1).unwrap();
    let path = dir.join(format!("{id}.inkml"));
    std::fs::write(&path, write_inkml(&sample)).unwrap();
    std::fs::write(path.with_extension("lg"), to_lg(sample.ground_truth.as_ref().unwrap()).to_string()).unwrap();
    path
}

fn small_checkpoint(dir: &Path) -> PathBuf {
    let data = dir.join("one");
    std::fs::create_dir_all(&data).unwrap();
    write_showcase(&data, 0);
    let manifest = dir.join("m.jsonl");
    ok(hme(&["extract-paths", "--input", s(&data), "--out", s(&manifest)]));
    let ck = dir.join("ck.json");
    ok(hme(&["train", "--manifest", s(&manifest), "--out", s(&ck), "--set", "epochs=0", "--set", "hidden=4"]));
    ck
}

#[test]
fn extract_from_empty_dir_writes_empty_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("m.jsonl");
    ok(hme(&["extract-paths", "--input", s(tmp.path()), "--out", s(&out)]));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
}

#[test]
fn pe1_only_gives_one_path_per_leaf() {
    let tmp = TempDir::new().unwrap();
    // \int d^{2}x has two leaves: 2 and x
    write_showcase(tmp.path(), 0);
    let out = tmp.path().join("m.jsonl");
    let run = ok(hme(&["extract-paths", "--input", s(tmp.path()), "--out", s(&out), "--rules", "PE1"]));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(String::from_utf8_lossy(&run.stderr).contains("PE1  2"));
}

#[test]
fn extraction_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    ok(hme(&["synth", "--out", s(&data), "--count", "6", "--seed", "4"]));
    let a = tmp.path().join("a.jsonl");
    let b = tmp.path().join("b.jsonl");
    for out in [&a, &b] {
        ok(hme(&["extract-paths", "--input", s(&data), "--out", s(out), "--rules", "PE1,PE2,PE3,CQ", "--seed", "9"]));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn unreadable_files_are_skipped_with_a_warning() {
    let tmp = TempDir::new().unwrap();
    write_showcase(tmp.path(), 0);
    std::fs::write(tmp.path().join("broken.inkml"), "<ink><trace>1 2,").unwrap();
    let out = tmp.path().join("m.jsonl");
    let run = ok(hme(&["extract-paths", "--input", s(tmp.path()), "--out", s(&out)]));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("warning: skipping") && err.contains("broken.inkml"), "{err}");
    assert!(err.contains("skipped 1 unreadable"), "{err}");
}

#[test]
fn zero_epochs_writes_initial_weights() {
    let tmp = TempDir::new().unwrap();
    let ck = small_checkpoint(tmp.path());
    let json: Value = serde_json::from_slice(&std::fs::read(&ck).unwrap()).unwrap();
    assert_eq!(json["hyper"]["hidden"], 4);
    assert!(tmp.path().join("ck.metrics.csv").exists());
}

#[test]
fn training_lowers_the_loss() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    ok(hme(&["synth", "--out", s(&data), "--count", "20", "--max-symbols", "4", "--seed", "2"]));
    let manifest = tmp.path().join("m.jsonl");
    ok(hme(&["extract-paths", "--input", s(&data), "--out", s(&manifest), "--set", "spacing=0.2"]));
    let cfg = tmp.path().join("train.conf");
    std::fs::write(&cfg, "spacing = 0.2\nlayers = 1\nhidden = 8\nepochs = 4\nlearning_rate = 0.01\nvalidation_fraction = 0\n")
        .unwrap();
    let ck = tmp.path().join("ck.json");
    let metrics = tmp.path().join("loss.csv");
    ok(hme(&["train", "--manifest", s(&manifest), "--out", s(&ck), "--config", s(&cfg), "--metrics", s(&metrics)]));
    let csv = std::fs::read_to_string(&metrics).unwrap();
    let totals: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(totals.len(), 4);
    assert!(totals[3] < totals[0], "{totals:?}");
}

#[test]
fn missing_manifest_fails() {
    let tmp = TempDir::new().unwrap();
    let run = hme(&["train", "--manifest", "/nonexistent.jsonl", "--out", s(&tmp.path().join("ck.json"))]);
    assert!(!run.status.success());
}

#[test]
fn invalid_config_names_the_problem() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.conf");
    std::fs::write(&cfg, "epochs = 3\nlearning_rat = 0.1\n").unwrap();
    let run = hme(&["train", "--manifest", "m.jsonl", "--out", "ck.json", "--config", s(&cfg)]);
    assert!(!run.status.success());
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("line 2") && err.contains("learning_rat") && err.contains("known keys"), "{err}");
    let run = hme(&["config", "--set", "batch_size=0"]);
    assert!(!run.status.success());
}

#[test]
fn config_command_round_trips() {
    let tmp = TempDir::new().unwrap();
    let run = ok(hme(&["config", "--set", "epochs=12", "--set", "rules=PE1,CQ"]));
    let cfg = tmp.path().join("c.conf");
    std::fs::write(&cfg, &run.stdout).unwrap();
    let again = ok(hme(&["config", "--config", s(&cfg)]));
    assert_eq!(run.stdout, again.stdout);
    assert!(String::from_utf8_lossy(&run.stdout).contains("epochs = 12"));
}

#[test]
fn single_dot_is_one_symbol() {
    let tmp = TempDir::new().unwrap();
    let ck = small_checkpoint(tmp.path());
    let input = tmp.path().join("dot.json");
    std::fs::write(&input, r#"{"strokes": [[[5, 5]]]}"#).unwrap();
    let run = ok(hme(&["recognize", "--checkpoint", s(&ck), "--input", s(&input)]));
    let v: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(v["v"], 1);
    assert_eq!(v["srt"]["nodes"].as_array().unwrap().len(), 1);
}

#[test]
fn oracle_recognizes_int_d2x() {
    let tmp = TempDir::new().unwrap();
    let ink = write_showcase(tmp.path(), 0);
    let run = ok(hme(&["recognize", "--oracle", "--input", s(&ink), "--format", "inkml"]));
    let v: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(v["latex"], "\\int d^{2}x");
    assert_eq!(v["dropped_fragments"].as_array().unwrap().len(), 0);
}

#[test]
fn corrupted_checkpoint_is_refused_without_output() {
    let tmp = TempDir::new().unwrap();
    let ink = write_showcase(tmp.path(), 0);
    let ck = tmp.path().join("bad.json");
    std::fs::write(&ck, "{\"v\": 1, \"weights\": [").unwrap();
    let run = hme(&["recognize", "--checkpoint", s(&ck), "--input", s(&ink)]);
    assert!(!run.status.success());
    assert!(run.stdout.is_empty());
}

#[test]
fn alphabet_mismatch_is_refused() {
    let tmp = TempDir::new().unwrap();
    let ck = small_checkpoint(tmp.path());
    let mut json: Value = serde_json::from_slice(&std::fs::read(&ck).unwrap()).unwrap();
    json["alphabet_hash"] = "deadbeef".into();
    std::fs::write(&ck, serde_json::to_vec(&json).unwrap()).unwrap();
    let ink = write_showcase(tmp.path(), 0);
    let run = hme(&["recognize", "--checkpoint", s(&ck), "--input", s(&ink)]);
    assert!(!run.status.success());
    assert!(run.stdout.is_empty());
    assert!(String::from_utf8_lossy(&run.stderr).contains("alphabet hash mismatch"));
}

#[test]
fn oracle_bypass_scores_perfectly() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    for i in 0..showcase().len() {
        write_showcase(&data, i);
    }
    // no LG: excluded and counted
    std::fs::write(data.join("unlabelled.inkml"), "<ink><trace>0 0, 1 1</trace></ink>").unwrap();
    let report = tmp.path().join("report.json");
    ok(hme(&["eval", "--oracle", "--input", s(&data), "--report", s(&report)]));
    let v: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["exprate"]["correct"], 1.0);
    assert_eq!(v["samples"], showcase().len());
    assert_eq!(v["excluded_no_truth"], 1);
    for ext in ["txt", "nodes.csv", "edges.csv"] {
        assert!(report.with_extension(ext).exists(), "{ext}");
    }
}

#[test]
fn empty_test_dir_reports_zero_counts() {
    let tmp = TempDir::new().unwrap();
    let ck = small_checkpoint(tmp.path());
    let empty = tmp.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let report = tmp.path().join("r.json");
    ok(hme(&["eval", "--checkpoint", s(&ck), "--input", s(&empty), "--report", s(&report)]));
    let v: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["samples"], 0);
    assert_eq!(v["segments"]["truth"], 0);
}

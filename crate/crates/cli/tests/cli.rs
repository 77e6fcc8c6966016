use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn psyc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psyc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = psyc(dir, args);
    assert!(
        out.status.success(),
        "psyc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn error_line(out: &Output) -> Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1, "stderr: {stderr}");
    serde_json::from_str(stderr.trim()).unwrap()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["synth", "--seed", "7", "--n", "20", "--out", "a"]);
    ok(tmp.path(), &["synth", "--seed", "7", "--n", "20", "--out", "b"]);
    let a = dir_contents(&tmp.path().join("a"));
    assert_eq!(a.len(), 20);
    assert_eq!(a, dir_contents(&tmp.path().join("b")));
    ok(tmp.path(), &["synth", "--seed", "8", "--n", "20", "--out", "c"]);
    assert_ne!(a, dir_contents(&tmp.path().join("c")));
    let manifest = json(&tmp.path().join("a.manifest.json"));
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["config"]["seed"], 7);
}

#[test]
fn classify_unlabelled_interview() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["synth", "--n", "5", "--out", "corpus"]);
    let mut record = json(&tmp.path().join("corpus/P0000.json"));
    record.as_object_mut().unwrap().remove("labels");
    fs::write(tmp.path().join("new.json"), record.to_string()).unwrap();
    ok(tmp.path(), &["classify", "--input", "new.json", "--out", "pred.json"]);
    let pred = json(&tmp.path().join("pred.json"));
    assert_eq!(pred["format"], "psyc-predictions");
    let predictions = pred["predictions"].as_array().unwrap();
    assert_eq!(predictions.len(), 4);
    let conflicts: BTreeSet<&str> = predictions.iter().map(|p| p["conflict"].as_str().unwrap()).collect();
    assert_eq!(conflicts.len(), 4);
    for p in predictions {
        let probs = p["fused_distribution"]["probs"].as_array().unwrap();
        let total: f64 = probs.iter().map(|v| v.as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(p["interview_id"], "P0000");
    }
    assert_eq!(pred["segments"].as_array().unwrap().len(), 16);
}

#[test]
fn train_then_classify_with_model() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["synth", "--n", "30", "--seed", "2", "--out", "train"]);
    ok(tmp.path(), &["synth", "--n", "5", "--seed", "99", "--out", "test"]);
    ok(tmp.path(), &["summarise", "--corpus", "train", "--out", "s.json"]);
    ok(tmp.path(), &["train-weights", "--corpus", "train", "--summaries", "s.json", "--out", "model"]);
    for f in ["index.json", "weights.json", "few-shot.json"] {
        assert!(tmp.path().join("model").join(f).exists(), "{f}");
    }
    ok(tmp.path(), &["classify", "--input", "test", "--model", "model", "--out", "pred.json"]);
    let pred = json(&tmp.path().join("pred.json"));
    let predictions = pred["predictions"].as_array().unwrap();
    assert_eq!(predictions.len(), 20);
    // The mock recovers planted labels once weights favour the home segments.
    let mut hits = 0;
    for p in predictions {
        let id = p["interview_id"].as_str().unwrap();
        let truth = json(&tmp.path().join("test").join(format!("{id}.json")));
        hits += usize::from(truth["labels"][p["conflict"].as_str().unwrap()] == p["label"]);
    }
    assert_eq!(hits, 20);
}

#[test]
fn evaluate_ablation_rows_and_fairness() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["synth", "--n", "20", "--out", "corpus"]);
    fs::write(tmp.path().join("c.toml"), "baseline_runs = 2\nworkers = 2\n").unwrap();
    let table = ok(
        tmp.path(),
        &["evaluate", "--config", "c.toml", "--corpus", "corpus", "--runs", "1", "--ablate", "no-manual", "--out", "rep"],
    );
    assert!(table.contains("w/o Manual"));
    let report = json(&tmp.path().join("rep/report.json"));
    let names: Vec<&str> = report["rows"].as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["Full", "w/o Manual"]);
    assert_eq!(report["rows"][1]["flags"]["manual"], false);
    assert_eq!(report["baselines"].as_array().unwrap().len(), 2);
    assert!(tmp.path().join("rep/report.txt").exists());
    let manifest = json(&tmp.path().join("rep.manifest.json"));
    assert_eq!(manifest["config"]["baseline_runs"], 2);
    assert_eq!(manifest["config"]["n_runs"], 1);

    ok(tmp.path(), &["fairness", "--report", "rep/report.json", "--corpus", "corpus", "--out", "fair"]);
    let fair = json(&tmp.path().join("fair/fairness.json"));
    assert_eq!(fair["row"], "Full");
    assert_eq!(fair["group_definition"], "male minus female");
    for (_, c) in fair["per_conflict"].as_object().unwrap() {
        assert!(c["per_class"].as_array().unwrap().iter().all(|v| v.as_f64().unwrap().abs() <= 1.0));
    }
}

#[test]
fn errors_are_single_json_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = error_line(&psyc(tmp.path(), &["evaluate", "--corpus", "nowhere"]));
    assert_eq!(missing["error"], "PathMissing");

    fs::write(tmp.path().join("bad.toml"), "n_folds = 1\n").unwrap();
    let bad = psyc(tmp.path(), &["synth", "--config", "bad.toml"]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(error_line(&bad)["error"], "ConfigInvalid");

    let ablate = error_line(&psyc(tmp.path(), &["index", "--ablate", "no-such-thing"]));
    assert_eq!(ablate["error"], "ConfigInvalid");

    fs::write(tmp.path().join("idx.json.lock"), "").unwrap();
    let locked = error_line(&psyc(tmp.path(), &["index", "--out", "idx.json"]));
    assert_eq!(locked["error"], "Locked");
    assert!(!tmp.path().join("idx.json").exists());
}

#[test]
fn init_writes_loadable_template() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["init"]);
    let text = fs::read_to_string(tmp.path().join("psyc.toml")).unwrap();
    assert!(text.contains("PSYC_API_KEY"));
    assert_eq!(error_line(&psyc(tmp.path(), &["init"]))["error"], "Usage");
    ok(tmp.path(), &["synth", "--config", "psyc.toml", "--n", "3", "--out", "corpus"]);
}

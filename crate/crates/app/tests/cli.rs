use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use modq_core::evalkit::EvalReport;
use modq_core::DatasetRow;
use serde_json::Value;
use tempfile::TempDir;

fn modq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modq"))
        .args(args)
        .env_remove("MODQ_CONFIG")
        .env_remove("MODQ_ADDR")
        .env_remove("MODQ_MODEL_DIR")
        .output()
        .unwrap()
}

#[track_caller]
fn ok(args: &[&str]) -> Output {
    let out = modq(args);
    assert!(out.status.success(), "modq {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_rows(p: &Path) -> Vec<DatasetRow> {
    std::fs::read_to_string(p).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

/// A small synthetic corpus split into `dir/splits`.
fn synth_and_split(dir: &Path) -> PathBuf {
    let data = dir.join("synth");
    ok(&["synth", "--out", s(&data), "--comments", "400", "--seed", "5"]);
    let splits = dir.join("splits");
    ok(&[
        "split",
        "--in",
        s(&data.join("dataset.jsonl")),
        "--out",
        s(&splits),
        "--seed",
        "3",
        "--holdout-communities",
        "2",
        "--holdout-rules",
        "3",
    ]);
    splits
}

#[test]
fn synth_and_split_write_every_set_and_rerun_identically() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let sa = synth_and_split(a.path());
    let sb = synth_and_split(b.path());
    let mut total = 0;
    for name in ["train", "dev", "test", "communities_holdout", "rules_holdout"] {
        let file = format!("{name}.jsonl");
        let bytes = std::fs::read(sa.join(&file)).unwrap();
        assert_eq!(bytes, std::fs::read(sb.join(&file)).unwrap(), "{file}");
        total += read_rows(&sa.join(&file)).len();
    }
    assert_eq!(total, read_rows(&a.path().join("synth/dataset.jsonl")).len());
    let held = json(&sa.join("held_out.json"));
    assert!(!held["communities"].as_array().unwrap().is_empty());

    let m = json(&sa.join("manifest.json"));
    assert_eq!(m["command"], "split");
    assert_eq!(m["seed"], 3);
    assert_eq!(m["config_hash"], json(&sb.join("manifest.json"))["config_hash"]);
    assert!(m["outputs"].as_object().unwrap().keys().any(|k| k.ends_with("train.jsonl")), "{m}");
    assert_eq!(m["inputs"].as_object().unwrap().len(), 1);
}

#[test]
fn flags_override_the_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("modq.toml");
    std::fs::write(&cfg, "[synth]\nseed = 21\nn_comments = 300\n").unwrap();
    let from_file = dir.path().join("file");
    ok(&["--config", s(&cfg), "synth", "--out", s(&from_file)]);
    assert_eq!(json(&from_file.join("manifest.json"))["seed"], 21);
    assert_eq!(read_rows(&from_file.join("dataset.jsonl")).len(), 300);

    let flagged = dir.path().join("flag");
    ok(&["--config", s(&cfg), "synth", "--out", s(&flagged), "--seed", "22"]);
    let m = json(&flagged.join("manifest.json"));
    assert_eq!(m["seed"], 22);
    assert_eq!(m["config"]["synth"]["n_comments"], 300);
    assert_ne!(
        std::fs::read(from_file.join("dataset.jsonl")).unwrap(),
        std::fs::read(flagged.join("dataset.jsonl")).unwrap()
    );

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[synth]\nsede = 1\n").unwrap();
    let out = modq(&["--config", s(&bad), "synth", "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sede"));
}

#[test]
fn baselines_train_evaluate_and_predict_round_trip() {
    let dir = TempDir::new().unwrap();
    let splits = synth_and_split(dir.path());
    let train = splits.join("train.jsonl");
    let test = splits.join("test.jsonl");
    for model in ["random", "cnb"] {
        let out = dir.path().join(model);
        ok(&["train", "--model", model, "--train", s(&train), "--out", s(&out)]);
        assert!(out.join("bank.json").is_file());
        assert_eq!(json(&out.join("manifest.json"))["command"], "train");

        let by_model = ok(&["evaluate", "--gold", s(&test), "--model", s(&out)]);
        let direct: EvalReport = serde_json::from_slice(&by_model.stdout).unwrap();
        assert_eq!(direct.n_records, read_rows(&test).len());

        let preds = dir.path().join(format!("{model}.preds.jsonl"));
        ok(&["predict", "--model", s(&out), "--in", s(&test), "--out", s(&preds)]);
        assert!(dir.path().join(format!("{model}.preds.manifest.json")).is_file());
        let report = dir.path().join(format!("{model}.eval.json"));
        ok(&["evaluate", "--gold", s(&test), "--pred", s(&preds), "--out", s(&report)]);
        let via_file: EvalReport = serde_json::from_value(json(&report)).unwrap();
        assert_eq!(via_file, direct, "{model}");
        assert!(dir.path().join(format!("{model}.eval.manifest.json")).is_file());
    }
}

#[test]
fn report_writes_table_chart_and_json() {
    let dir = TempDir::new().unwrap();
    let splits = synth_and_split(dir.path());
    let model = dir.path().join("cnb");
    ok(&["train", "--model", "cnb", "--train", s(&splits.join("train.jsonl")), "--out", s(&model)]);
    let out = dir.path().join("report");
    ok(&["report", "--model", s(&model), "--splits", s(&splits), "--out", s(&out)]);
    let csv = std::fs::read_to_string(out.join("generalization.csv")).unwrap();
    assert!(csv.lines().count() >= 2, "{csv}");
    let png = std::fs::read(out.join("generalization.png")).unwrap();
    assert_eq!(&png[..8], b"\x89PNG\r\n\x1a\n");
    let report = json(&out.join("report.json"));
    assert!(report["test"].is_object(), "{report}");
}

#[test]
fn mock_harvest_feeds_build_dataset() {
    let dir = TempDir::new().unwrap();
    let harvest = dir.path().join("harvest");
    ok(&["harvest", "--mock", "--rate", "1000", "--depth", "2", "--out", s(&harvest)]);
    let records = std::fs::read_to_string(harvest.join("records.jsonl")).unwrap();
    assert!(records.lines().count() > 0);
    for f in ["hosts.jsonl", "snapshot.jsonl", "parse_errors.jsonl", "harvest_stats.json", "manifest.json"] {
        assert!(harvest.join(f).is_file(), "{f}");
    }
    let data = dir.path().join("data");
    ok(&["build-dataset", "--records", s(&harvest.join("records.jsonl")), "--out", s(&data)]);
    let rows = read_rows(&data.join("dataset.jsonl"));
    assert!(!rows.is_empty());
    for r in &rows {
        assert!(r.rules.iter().any(|x| x.number == r.gold_rule_number) || r.gold_rule_number == 0, "{}", r.id);
    }
    assert!(json(&data.join("build_stats.json")).is_object());
}

#[test]
fn normvio_export_builds_rows() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("normvio.csv");
    std::fs::write(
        &csv,
        "id,subreddit,conversation,rule,moderated\n\
         a,r/pics,\"[\"\"nice shot\"\",\"\"buy cheap pills here\"\"]\",No spam or advertising,true\n\
         b,r/pics,you are an idiot,Be civil,true\n\
         c,r/pics,lovely colors,No spam or advertising,false\n",
    )
    .unwrap();
    let out = dir.path().join("nv");
    ok(&["build-dataset", "--normvio", s(&csv), "--out", s(&out)]);
    let rows = read_rows(&out.join("dataset.jsonl"));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r.gold_rule_number).collect::<Vec<_>>(), vec![1, 2, 0]);
    assert_eq!(rows[0].comment_text, "buy cheap pills here");
}

#[test]
fn usage_errors_exit_nonzero() {
    let out = modq(&["frobnicate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = modq(&["serve"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no models"));

    let dir = TempDir::new().unwrap();
    let out = modq(&["evaluate", "--gold", s(&dir.path().join("missing.jsonl")), "--pred", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use divgen::data::save_dataset;
use divgen::synthetic::{copy_example, copy_task};

fn divgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divgen")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Trains a two-member toy run and returns (tempdir, run dir, dataset path).
fn toy_run() -> (tempfile::TempDir, PathBuf, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("train.csv");
    save_dataset(&data, &copy_task(12, 3)).unwrap();
    let run = tmp.path().join("run");
    let config = serde_json::json!({
        "data": {"train": data},
        "model": {"embed_size": 8, "hidden_size": 8, "encoder_layers": 1, "decoder_layers": 1},
        "ensemble": {"k": 2, "pretrain_epochs": 1},
        "optimizer": {"batch_size": 4},
        "epochs": 2,
    });
    let cfg = tmp.path().join("config.json");
    fs::write(&cfg, config.to_string()).unwrap();
    let out = divgen(&["train", "--config", s(&cfg), "--output", s(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (tmp, run, data)
}

#[test]
fn missing_training_data_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("config.json");
    fs::write(&cfg, r#"{"data": {"train": "/nonexistent/train.csv"}}"#).unwrap();
    let out = divgen(&["train", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn unknown_config_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("config.json");
    fs::write(&cfg, r#"{"epochz": 3}"#).unwrap();
    assert_eq!(divgen(&["train", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn usage_error_exits_two() {
    assert_eq!(divgen(&["generate"]).status.code(), Some(2));
}

#[test]
fn train_then_generate_and_evaluate() {
    let (tmp, run, data) = toy_run();
    for k in 0..2 {
        for e in 0..=2 {
            assert!(run.join(format!("member{k}-epoch{e}.json")).exists());
        }
    }
    for f in ["vocab.json", "config.json", "assignments.csv", "report.json"] {
        assert!(run.join(f).exists(), "{f}");
    }

    let input = tmp.path().join("mrs.txt");
    let mr = copy_example("zyqwell", "french", "riverside").mr.to_bracketed();
    fs::write(&input, format!("{mr}\n{mr}\n")).unwrap();
    let text = tmp.path().join("out.txt");
    let nbest = tmp.path().join("nbest.jsonl");
    let out = divgen(&[
        "generate", "--run", s(&run), "--input", s(&input), "--output", s(&text), "--nbest", s(&nbest),
        "--member", "1", "--beam-size", "3", "--max-len", "12", "--block-repeats",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<String> = fs::read_to_string(&text).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], lines[1]);
    let entries: Vec<serde_json::Value> = fs::read_to_string(&nbest)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!entries.is_empty() && entries.len() <= 6);
    assert_eq!(entries[0]["rank"], 1);
    assert_eq!(entries[0]["source_mr"], mr.as_str());

    // Generation selects a member from validation data when --member is absent.
    let out = divgen(&["generate", "--run", s(&run), "--input", s(&input), "--valid", s(&data), "--max-len", "12"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 2);

    let json = tmp.path().join("metrics.json");
    let reference = tmp.path().join("ref.csv");
    let example = copy_example("zyqwell", "french", "riverside");
    save_dataset(&reference, std::slice::from_ref(&example)).unwrap();
    let cand = tmp.path().join("cand.txt");
    fs::write(&cand, format!("{}\n", example.references[0].join(" "))).unwrap();
    let out = divgen(&["evaluate", "--generated", s(&cand), "--data", s(&reference), "--json", s(&json), "--run", s(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!((report["bleu"].as_f64().unwrap() - 100.0).abs() < 1e-9);
    assert!((report["rouge_l"].as_f64().unwrap() - 100.0).abs() < 1e-9);
    assert!(report["perplexity"].as_f64().unwrap() >= 1.0);
    assert!(stdout(&out).contains("BLEU"));
}

#[test]
fn empty_input_generates_nothing() {
    let (tmp, run, _) = toy_run();
    let input = tmp.path().join("empty.txt");
    fs::write(&input, "").unwrap();
    let out = divgen(&["generate", "--run", s(&run), "--input", s(&input), "--member", "0"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn generate_rejects_missing_member_and_bad_decode_settings() {
    let (tmp, run, _) = toy_run();
    let input = tmp.path().join("mrs.txt");
    fs::write(&input, "name[x]\n").unwrap();
    assert_eq!(divgen(&["generate", "--run", s(&run), "--input", s(&input), "--member", "5"]).status.code(), Some(1));
    let out = divgen(&["generate", "--run", s(&run), "--input", s(&input), "--member", "0", "--beam-size", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_rejects_line_count_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("ref.csv");
    save_dataset(&data, &copy_task(3, 1)).unwrap();
    let cand = tmp.path().join("cand.txt");
    fs::write(&cand, "one line\n").unwrap();
    let out = divgen(&["evaluate", "--generated", s(&cand), "--data", s(&data)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn assignments_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let log = tmp.path().join("log.csv");
    fs::write(&log, "example_id,epoch,chosen_members\n").unwrap();
    let out = divgen(&["assignments", "--log", s(&log), "--members", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("empty log") && text.contains("member 1: 0"));

    fs::write(
        &log,
        "example_id,epoch,chosen_members\n0,1,0;1\n1,1,0;1\n0,2,1\n1,2,0\n2,2,0\n",
    )
    .unwrap();
    let labels = tmp.path().join("labels.txt");
    fs::write(&labels, "0\n1\n0\n").unwrap();
    let out = divgen(&["assignments", "--log", s(&log), "--labels", s(&labels)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("epoch 2"));
    assert!(text.contains("member 0: 2") && text.contains("member 1: 1"));
    assert!(text.contains("purity: 0.6667"), "{text}");
}

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::data;
use glossdom::dataset::{load_corpus, CorpusFormat};
use glossdom::engine::{classify_batch, BatchOptions, EngineConfig};
use glossdom::eval::topk_accuracy;
use glossdom::labelspace::babeldomains;
use glossdom::scorer::MockScorer;

fn glossdom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glossdom"))
        .args(args)
        .env_remove("GLOSSDOM_BACKEND_URL")
        .env_remove("GLOSSDOM_BACKEND_TIMEOUT_MS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = glossdom(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn label_matches_golden_file() {
    let out = ok(&[
        "--backend", "mock", "label", "--descriptors", "--top", "5",
        "--text", "a red card shown to a player for a serious foul in a sport",
    ]);
    let golden = fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/label_red_card.txt"),
    )
    .unwrap();
    assert_eq!(out, golden);
}

#[test]
fn exit_codes() {
    let out = glossdom(&["--backend", "mock", "label", "--text", ""]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty gloss"));

    let out = glossdom(&["--backend", "mock", "label", "--text", "x", "--pattern", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("topic-or-domain") && err.contains("domain-of-sentence"));

    let out = glossdom(&["label"]);
    assert_eq!(out.status.code(), Some(2));

    // backend unreachable
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}");
    let out = glossdom(&["--backend-url", &url, "--timeout-ms", "200", "label", "--text", "x"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn evaluate_topk_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = data("sample_glosses.tsv");
    let out = ok(&[
        "--backend", "mock", "evaluate", "--corpus", p(&corpus_path), "--descriptors",
        "--topk", "1,3,5", "--out-dir", p(dir.path()),
    ]);
    let corpus = load_corpus(&corpus_path, CorpusFormat::Tsv).unwrap();
    let labels = babeldomains();
    let cfg = EngineConfig::default().with_descriptors(true);
    let preds = classify_batch(&corpus, &labels, &cfg, &MockScorer::new(), BatchOptions::default())
        .unwrap()
        .predictions;
    let acc = topk_accuracy(&preds, &corpus, &labels, &[1, 3, 5]).unwrap();
    let lines: Vec<&str> = out.lines().filter(|l| l.contains("accuracy")).collect();
    assert_eq!(lines.len(), 3);
    for (line, k) in lines.iter().zip([1, 3, 5]) {
        assert_eq!(*line, format!("top-{k:<2} accuracy  {:.4}", acc[&k]));
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["top_k"]["1"], acc[&1]);
    assert_eq!(report["config"]["engine"]["use_descriptors"], true);
    assert_eq!(report["config"]["seed"], 13);
}

/// A dump from an external classifier (top-1 only, no config) is scored as is.
#[test]
fn evaluate_foreign_prediction_dump() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = data("sample_glosses.tsv");
    let corpus = load_corpus(&corpus_path, CorpusFormat::Tsv).unwrap();
    let mut dump = String::new();
    for (i, r) in corpus.iter().enumerate() {
        let label = if i % 4 == 0 { "History" } else { r.gold_label.as_deref().unwrap() };
        dump.push_str(&format!(
            "{{\"id\":\"{}\",\"top\":[{{\"label\":\"{label}\",\"p\":0.9}}],\"abstained\":false}}\n",
            r.id
        ));
    }
    let dump_path = dir.path().join("student.jsonl");
    fs::write(&dump_path, dump).unwrap();
    let out = ok(&[
        "--backend", "mock", "evaluate", "--corpus", p(&corpus_path), "--predictions",
        p(&dump_path), "--topk", "1", "--out-dir", p(&dir.path().join("r")),
    ]);
    assert!(out.contains("top-1  accuracy  0.7500"), "{out}");
    assert!(out.contains("f1               0.7500"));
    assert!(!dir.path().join("r/predictions.jsonl").exists());
}

#[test]
fn sweep_has_one_row_per_pattern_and_monotone_recall() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "--backend", "mock", "sweep", "--corpus", p(&data("sample_glosses.tsv")),
        "--thresholds", "0,0.02,0.03,0.04,0.05,0.1", "--out-dir", p(dir.path()),
    ]);
    let csv = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    let sweep = fs::read_to_string(dir.path().join("sweep-domain-of-sentence.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(lines.next(), Some("threshold,precision,recall,f1"));
    let recalls: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(recalls.len(), 6);
    assert!(recalls.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn annotate_resume_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let pool = data("sample_pool.tsv");
    let clean = dir.path().join("clean.jsonl");
    let out = ok(&["--backend", "mock", "annotate", "--pool", p(&pool), "--out", p(&clean)]);
    let summary: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(summary["written"], 30);
    assert_eq!(fs::read_to_string(&clean).unwrap().lines().count(), 30);

    let split = dir.path().join("split.jsonl");
    ok(&["--backend", "mock", "annotate", "--pool", p(&pool), "--out", p(&split), "--limit", "11"]);
    let out = ok(&["--backend", "mock", "annotate", "--pool", p(&pool), "--out", p(&split), "--resume"]);
    let summary: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(summary["resumed"], 11);
    assert_eq!(summary["processed"], 19);
    assert_eq!(fs::read(&clean).unwrap(), fs::read(&split).unwrap());

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&["--backend", "mock", "--seed", "7", "export", "--silver", p(&clean), "--out-dir", p(d)]);
    }
    for f in ["train.jsonl", "dev.jsonl", "labels.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let train = fs::read_to_string(a.join("train.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(train.lines().next().unwrap()).unwrap();
    assert!(first["text"].is_string() && first["label"].is_string());
    assert_eq!(first.as_object().unwrap().len(), 2);

    let half = dir.path().join("half");
    let out = ok(&["--backend", "mock", "export", "--silver", p(&clean), "--split", "0.5,0.5", "--out-dir", p(&half)]);
    let summary: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!((summary["n_train"].as_u64(), summary["n_dev"].as_u64()), (Some(15), Some(15)));
    let out = glossdom(&["--backend", "mock", "export", "--silver", p(&clean), "--split", "0.5", "--out-dir", p(&half)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("glossdom.toml");
    fs::write(&cfg, "backend = \"mock\"\ndescriptors = true\n").unwrap();
    let out = ok(&[
        "--config", p(&cfg), "label", "--top", "5",
        "--text", "a red card shown to a player for a serious foul in a sport",
    ]);
    let golden = fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/label_red_card.txt"),
    )
    .unwrap();
    assert_eq!(out, golden);

    let out = Command::new(env!("CARGO_BIN_EXE_glossdom"))
        .args(["label", "--text", "x"])
        .env("GLOSSDOM_BACKEND_URL", "http://127.0.0.1:9")
        .env("GLOSSDOM_BACKEND_TIMEOUT_MS", "soon")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("GLOSSDOM_BACKEND_TIMEOUT_MS"));
}

mod common;

use std::path::Path;
use std::process::{Command, Output};

fn nyaya(data_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nyaya"))
        .args(args)
        .env_clear()
        .env("NYAYA_DATA_DIR", data_dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn classify_prints_label_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let out = nyaya(dir.path(), &["classify", "--text", "What is the punishment for theft under the IPC?"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("criminal (confidence "), "{text}");
    assert_eq!(text.lines().count(), 6);

    let out = nyaya(dir.path(), &["classify", "--lexicon-only", "--text", "best biryani recipe"]);
    assert!(stdout(&out).starts_with("out_of_domain"));
}

#[test]
fn ingest_reports_bad_lines_with_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = common::fixture("corpus_missing_body.jsonl");
    let input = input.to_str().unwrap();

    let strict = nyaya(dir.path(), &["ingest", "--input", input, "--strict"]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(!dir.path().join("corpus.jsonl").exists());

    let lenient = nyaya(dir.path(), &["ingest", "--input", input]);
    assert_eq!(lenient.status.code(), Some(2));
    assert!(stdout(&lenient).starts_with("ingested 2 documents"));
    let stored = std::fs::read_to_string(dir.path().join("corpus.jsonl")).unwrap();
    assert_eq!(stored.lines().count(), 2);

    // a second run finds the ids already present
    let again = nyaya(dir.path(), &["ingest", "--input", input]);
    assert!(stdout(&again).starts_with("ingested 0 documents"));
}

#[test]
fn index_build_and_query() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/corpus/sample_corpus.jsonl");
    let index = dir.path().join("sample.nyix");
    let build = nyaya(dir.path(), &["index", "build", "--corpus", corpus.to_str().unwrap(), "--out", index.to_str().unwrap()]);
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    assert!(stdout(&build).starts_with("indexed 25 chunks from 25 documents"));

    let query = nyaya(dir.path(), &["index", "query", "--index", index.to_str().unwrap(), "--text", "direction from the Court of Session to be released on bail", "-k", "3"]);
    let text = stdout(&query);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().next().unwrap().ends_with("crim-crpc438#0"), "{text}");

    std::fs::write(&index, b"NYIX").unwrap();
    let broken = nyaya(dir.path(), &["index", "query", "--index", index.to_str().unwrap(), "--text", "bail"]);
    assert!(!broken.status.success());
    assert!(String::from_utf8_lossy(&broken.stderr).contains("corrupt index"));
}

#[test]
fn rules_lint_and_eval_run() {
    let dir = tempfile::tempdir().unwrap();
    let lint = nyaya(dir.path(), &["rules", "lint"]);
    assert!(stdout(&lint).starts_with("built-in rules: 29 rules OK"));
    let bad = dir.path().join("rules.jsonl");
    std::fs::write(&bad, "{\"rule_id\": \"x\"}\n").unwrap();
    assert!(!nyaya(dir.path(), &["rules", "lint", "--path", bad.to_str().unwrap()]).status.success());

    let dataset = common::fixture("eval_dataset.jsonl");
    let eval = nyaya(dir.path(), &["eval", "run", "--dataset", dataset.to_str().unwrap(), "--json"]);
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let report: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(report["records"], 8);
}

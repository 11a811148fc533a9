use std::path::Path;
use std::process::{Command, Output};

use gcd::fixture::toy_model;
use gcd::{save_model, DType, DecompositionMatrix};

fn gcd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcd"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn export(dir: &Path) -> String {
    save_model(&toy_model(), dir, DType::F32)
        .unwrap()
        .display()
        .to_string()
}

#[test]
fn decompose_reports_verb_candidates() {
    let o = gcd(&["decompose", "the boy greets", "--focus", "0:2", "--words", "greets,greet", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let words: Vec<&str> = v["words"].as_array().unwrap().iter().map(|w| w["word"].as_str().unwrap()).collect();
    assert!(words.contains(&"greets") && words.contains(&"greet"));
    assert_eq!(v["focus"], serde_json::json!([[0, 2]]));
}

#[test]
fn decompose_text_table() {
    let o = gcd(&["decompose", "the boy greets", "--focus", "0:2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("focus: [0, 2) the boy"));
    assert!(text.lines().count() >= 4 + 5);
}

#[test]
fn empty_focus_reports_zero_inside() {
    let o = gcd(&["decompose", "the boy near the cars", "--interactions", "no-intercept", "--format", "json", "--no-decoder-bias"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for w in v["words"].as_array().unwrap() {
        assert_eq!(w["beta"].as_f64(), Some(0.0));
        assert_eq!(w["score"].as_f64(), Some(0.0));
    }
}

#[test]
fn malformed_span_is_a_config_error() {
    let o = gcd(&["decompose", "the boy", "--focus", "2:1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--focus"));
    let o = gcd(&["decompose", "the boy", "--focus", "1:5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_word_is_a_data_error() {
    let o = gcd(&["decompose", "the giraffe"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("giraffe"));
}

#[test]
fn missing_model_is_a_data_error() {
    let o = gcd(&["na-eval", "--model", "/definitely/missing/manifest.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flags_are_config_errors() {
    assert_eq!(gcd(&["na-eval", "--interactions", "nonsense", "--count", "2"]).status.code(), Some(1));
    assert_eq!(gcd(&["na-eval", "--modes", "in:nowhere", "--count", "2"]).status.code(), Some(1));
    assert_eq!(gcd(&["na-eval", "--workers", "0", "--count", "2"]).status.code(), Some(1));
    assert_eq!(gcd(&["decompose", "the boy", "--pairs", "beta-beta"]).status.code(), Some(1));
    assert_eq!(gcd(&["decompose"]).status.code(), Some(1));
    assert_eq!(gcd(&["--help"]).status.code(), Some(0));
}

#[test]
fn na_eval_table_layout_and_determinism() {
    let args = ["na-eval", "--count", "40", "--seed", "3", "--workers", "2"];
    let a = gcd(&args);
    let b = gcd(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "task,condition,mode,policy,include_decoder_intercept,accuracy,n,ties,degenerate"
    );
    // 8 task/condition rows x 4 modes.
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 32);
    let modes: Vec<&str> = rows[..4].iter().map(|r| r.split(',').nth(2).unwrap()).collect();
    assert_eq!(modes, ["full", "in:subject", "intercept*:intercepts", "no-intercept:subject"]);
}

#[test]
fn policies_give_separate_tables() {
    let run = |policy| {
        let o = gcd(&["na-eval", "--task", "nounpp", "--condition", "PS", "--count", "30", "--policy", policy]);
        assert_eq!(o.status.code(), Some(0));
        stdout(&o)
    };
    let full = run("full");
    let fixed = run("fixed");
    assert!(full.lines().skip(1).all(|l| l.split(',').nth(3) == Some("full")));
    assert!(fixed.lines().skip(1).all(|l| l.split(',').nth(3) == Some("fixed")));
}

#[test]
fn instance_log_recomputes_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("instances.jsonl");
    let o = gcd(&[
        "na-eval", "--task", "namepp", "--condition", "PS", "--count", "25", "--modes", "in", "--format", "json",
        "--instances", log.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let results: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let text = std::fs::read_to_string(&log).unwrap();
    let wins = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["outcome"]["win"] == serde_json::Value::Bool(true))
        .count();
    assert_eq!(text.lines().count(), 25);
    assert_eq!(results[0]["accuracy"].as_f64().unwrap(), 100.0 * wins as f64 / 25.0);
}

#[test]
fn gender_eval_and_preference_cells() {
    let o = gcd(&["gender-eval", "--kind", "unambiguous", "--count", "20"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1 + 4 * 4);
    let o = gcd(&["gender-eval", "--kind", "stereotypical", "--count", "10", "--preference"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("kind,condition,slot,mean,n,degenerate"));
    assert_eq!(text.lines().count(), 1 + 4 * 5);
}

#[test]
fn sentence_matrix_has_init_row_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let o = gcd(&["matrix", "--sentence", "the boys near the car", "--extra", "greets", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let m = DecompositionMatrix::read_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(m.shape(), (5, 6));
    let json = gcd(&["matrix", "--sentence", "the boys near the car", "--extra", "greets", "--format", "json"]);
    let j: DecompositionMatrix = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(j.rows, m.rows);
    for (a, b) in j.values.iter().flatten().chain(&j.init).zip(m.values.iter().flatten().chain(&m.init)) {
        match (a, b) {
            (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-12),
            (None, None) => {}
            _ => panic!("missing-value mismatch"),
        }
    }
}

#[test]
fn corpus_matrix_is_template_sized() {
    let dir = tempfile::tempdir().unwrap();
    let per = dir.path().join("each");
    let o = gcd(&[
        "matrix", "--task", "nounpp", "--condition", "SP", "--count", "12",
        "--per-sentence", per.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = DecompositionMatrix::read_csv(o.stdout.as_slice()).unwrap();
    // Five template tokens plus the verb; the competitor verb is an extra column.
    assert_eq!(m.shape(), (6, 7));
    assert_eq!(m.rows[1], "<subject>");
    assert_eq!(std::fs::read_dir(&per).unwrap().count(), 12);
}

#[test]
fn gen_corpus_is_reproducible() {
    let run = || gcd(&["gen-corpus", "--task", "nounpp", "--condition", "SP", "--count", "3", "--seed", "7"]);
    let a = run();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, run().stdout);
    assert_eq!(stdout(&a).lines().count(), 3);
    let g = gcd(&["gen-corpus", "--kind", "unambiguous", "--condition", "MF", "--count", "2", "--seed", "1"]);
    assert_eq!(stdout(&g).lines().count(), 2);
    assert_eq!(gcd(&["gen-corpus", "--task", "simple", "--condition", "SP"]).status.code(), Some(1));
}

#[test]
fn evaluation_reads_generated_corpus_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let g = gcd(&["gen-corpus", "--task", "nounpp", "--condition", "PP", "--count", "20", "--out", path.to_str().unwrap()]);
    assert_eq!(g.status.code(), Some(0));
    let o = gcd(&["na-eval", "--corpus", path.to_str().unwrap(), "--modes", "full"]);
    assert_eq!(o.status.code(), Some(0));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("nounpp,PP,full,full,true,"), "{row}");
}

#[test]
fn inspect_exported_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = export(dir.path());
    let o = gcd(&["inspect-model", "--model", &manifest, "he", "she", "zebra"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("hidden sizes: [16, 16]"));
    assert!(text.contains("vocabulary size: 64"));
    assert!(text.contains("decoder intercept he: 2.0000"));
    assert!(text.contains("zebra: absent"));
}

#[test]
fn custom_mode_uses_inline_pairs() {
    let o = gcd(&[
        "na-eval", "--task", "simple", "--condition", "S", "--count", "10", "--modes", "custom:subject",
        "--pairs", "beta:beta", "--no-decoder-bias",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(row.contains("{beta:beta"), "{row}");
}

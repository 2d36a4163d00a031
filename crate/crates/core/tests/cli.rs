use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use arsample::experiment::{
    cmd_analyze, cmd_eval, cmd_oracle, cmd_sample, cmd_ttest, parse_numbers, write_curve_csv, ExperimentConfig,
    OracleConfig, RunRecord, SampleLine,
};
use arsample::lm::{ExplicitTableModel, TableFile};
use arsample::subsample::divisors;
use arsample::toy::ReasoningTask;
use arsample::Error;
use serde_json::{json, Value};
use tempfile::TempDir;

fn write_json(path: &Path, v: &impl serde::Serialize) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn write_table(dir: &Path, name: &str, model: &ExplicitTableModel) -> PathBuf {
    let path = dir.join(name);
    write_json(&path, &model.to_table());
    path
}

/// Reasoning-task files plus a consistency config value.
fn reasoning_setup(dir: &Path, questions: usize, answer_probs: Vec<f64>) -> Value {
    let task = ReasoningTask::new(questions, &["3", "5", "8"], answer_probs, vec![0.5, 0.3, 0.2], 1).unwrap();
    write_table(dir, "model.json", &task.to_table_model().unwrap());
    let lines: Vec<String> = (0..questions)
        .map(|q| json!({"id": format!("q{q}"), "prompt": [format!("q{q}")], "gold": task.gold(q)}).to_string())
        .collect();
    fs::write(dir.join("data.jsonl"), lines.join("\n")).unwrap();
    json!({
        "model": {"kind": "explicit-table", "path": "model.json"},
        "strategy": "arithmetic",
        "n": 4,
        "master_seed": 3,
        "max_len": task.max_len(),
        "task": "consistency",
        "dataset": "data.jsonl",
        "extractor": {"kind": "last-token"}
    })
}

fn config(dir: &Path, v: Value) -> ExperimentConfig {
    ExperimentConfig::from_value(v, dir).unwrap()
}

fn sample_bytes(c: &ExperimentConfig) -> Vec<u8> {
    let mut out = Vec::new();
    cmd_sample(c, &mut out).unwrap();
    out
}

#[test]
fn sample_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let mut v = reasoning_setup(dir.path(), 3, vec![0.4, 0.35, 0.25]);
    v["n"] = json!(2);
    let c = config(dir.path(), v);
    let first = sample_bytes(&c);
    assert_eq!(first, sample_bytes(&c));
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 6);

    let mut parallel = c.clone();
    parallel.workers = 4;
    parallel.n = 2;
    assert_eq!(sample_bytes(&c), sample_bytes(&parallel));
}

#[test]
fn sample_provenance_fields() {
    let dir = TempDir::new().unwrap();
    let v = reasoning_setup(dir.path(), 2, vec![0.4, 0.35, 0.25]);
    for (strategy, key, absent) in [("arithmetic", "code", "seed"), ("ancestral", "seed", "code")] {
        let mut v = v.clone();
        v["strategy"] = json!(strategy);
        v["vocab_perm_seed"] = json!(5);
        let text = String::from_utf8(sample_bytes(&config(dir.path(), v))).unwrap();
        for line in text.lines() {
            let rec: Value = serde_json::from_str(line).unwrap();
            assert!(rec.get(key).is_some(), "{line}");
            assert!(rec.get(absent).is_none(), "{line}");
            assert_eq!(rec["vocab_perm_seed"], json!(5));
            let parsed: SampleLine = serde_json::from_str(line).unwrap();
            assert_eq!(parsed.sample.tokens.len(), parsed.sample.token_ids.len());
            assert!(parsed.sample.logprob <= 0.0);
        }
    }
}

#[test]
fn missing_dataset_names_path() {
    let dir = TempDir::new().unwrap();
    let mut v = reasoning_setup(dir.path(), 1, vec![0.4, 0.35, 0.25]);
    v["dataset"] = json!("absent.jsonl");
    let err = cmd_sample(&config(dir.path(), v), &mut Vec::new()).unwrap_err();
    assert!(matches!(err, Error::MissingFile(_)));
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("absent.jsonl"));
}

#[test]
fn invalid_config_reports_field() {
    let dir = TempDir::new().unwrap();
    let mut v = reasoning_setup(dir.path(), 1, vec![0.4, 0.35, 0.25]);
    v["n"] = json!(0);
    match ExperimentConfig::from_value(v, dir.path()) {
        Err(e @ Error::Config { .. }) => {
            assert_eq!(e.exit_code(), 2);
            assert!(e.to_string().contains("`n`"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn eval_accuracy_one_when_gold_always_wins() {
    let dir = TempDir::new().unwrap();
    let v = reasoning_setup(dir.path(), 4, vec![1.0, 0.0, 0.0]);
    let record = cmd_eval(&config(dir.path(), v)).unwrap();
    assert_eq!(record.summary.mean, 1.0);
    assert_eq!(record.summary.std, 0.0);
    assert_eq!(record.summary.to_string(), "accuracy=1.0000 ± 0.0000");
    for inst in &record.instances {
        assert_eq!(inst.decision, inst.gold);
    }
}

#[test]
fn eval_all_abstain_counts_as_incorrect() {
    let dir = TempDir::new().unwrap();
    let mut v = reasoning_setup(dir.path(), 2, vec![0.4, 0.35, 0.25]);
    v["extractor"] = json!({"kind": "regex-capture", "pattern": "answer: (\\d+)"});
    let record = cmd_eval(&config(dir.path(), v)).unwrap();
    assert_eq!(record.summary.mean, 0.0);
    assert_eq!(record.warnings.len(), 2);
    assert!(record.instances.iter().all(|i| i.decision.is_none()));
}

fn echo_setup(dir: &Path) -> Value {
    let table: TableFile = serde_json::from_value(json!({
        "vocab": ["a", "b", "c", "</s>"],
        "eos": 3,
        "rows": {
            "": [1.0, 0.0, 0.0, 0.0],
            "a": [0.0, 1.0, 0.0, 0.0],
            "a b": [0.0, 0.0, 0.0, 1.0]
        }
    }))
    .unwrap();
    write_json(&dir.join("echo.json"), &table);
    fs::write(dir.join("refs.jsonl"), "{\"id\": 1, \"gold\": \"a b\"}\n{\"id\": 2, \"gold\": \"a b\"}\n").unwrap();
    json!({
        "model": {"kind": "explicit-table", "path": "echo.json"},
        "strategy": "ancestral",
        "n": 3,
        "max_len": 4,
        "task": "mbr",
        "dataset": "refs.jsonl",
        "utility": {"kind": "ngram-f"}
    })
}

#[test]
fn mbr_identical_candidates_have_unit_utility() {
    let dir = TempDir::new().unwrap();
    let record = cmd_eval(&config(dir.path(), echo_setup(dir.path()))).unwrap();
    assert_eq!(record.summary.metric, "utility");
    assert_eq!(record.summary.mean, 1.0);
    assert_eq!(record.instances[0].decision.as_deref(), Some("a b"));
}

#[test]
fn diversity_eval_runs() {
    let dir = TempDir::new().unwrap();
    let mut v = reasoning_setup(dir.path(), 2, vec![0.4, 0.35, 0.25]);
    v["task"] = json!("diversity");
    v["n"] = json!(10);
    let record = cmd_eval(&config(dir.path(), v)).unwrap();
    assert_eq!(record.summary.metric, "diversity");
    assert!(record.summary.mean > 0.0 && record.summary.mean <= 4.0);
}

#[test]
fn eval_replays_bit_identically() {
    let dir = TempDir::new().unwrap();
    let mut v = reasoning_setup(dir.path(), 5, vec![0.4, 0.35, 0.25]);
    v["strategy"] = json!("ancestral");
    let c = config(dir.path(), v);
    let mut a = cmd_eval(&c).unwrap();
    let mut b = cmd_eval(&c).unwrap();
    a.duration_secs = 0.0;
    b.duration_secs = 0.0;
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    let path = dir.path().join("run.json");
    a.save(&path).unwrap();
    let loaded = RunRecord::load(&path).unwrap();
    assert_eq!(loaded.config_hash, a.config_hash);
    assert_eq!(loaded.instances, a.instances);
    assert_eq!(loaded.config.hash().unwrap(), a.config_hash);
}

fn eval_pair(dir: &Path, questions: usize, n: usize) -> (RunRecord, RunRecord) {
    let mut v = reasoning_setup(dir, questions, vec![0.4, 0.35, 0.25]);
    v["n"] = json!(n);
    let a = cmd_eval(&config(dir, v.clone())).unwrap();
    v["strategy"] = json!("ancestral");
    let b = cmd_eval(&config(dir, v)).unwrap();
    (a, b)
}

#[test]
fn analyze_identical_records() {
    let dir = TempDir::new().unwrap();
    let (a, _) = eval_pair(dir.path(), 4, 6);
    let analysis = cmd_analyze(&a, &a, Some(5), Some(1)).unwrap();
    assert_eq!(analysis.ttest.t, 0.0);
    assert_eq!(analysis.ttest.p, 1.0);
}

#[test]
fn analyze_curve_shape_and_identity_row() {
    let dir = TempDir::new().unwrap();
    let (a, b) = eval_pair(dir.path(), 6, 12);
    let analysis = cmd_analyze(&a, &b, None, None).unwrap();
    assert_eq!(analysis.rows.len(), 2 * divisors(12).len());
    for (record, strategy) in [(&a, arsample::sampler::Strategy::Arithmetic), (&b, arsample::sampler::Strategy::Ancestral)] {
        let full = analysis.rows.iter().find(|r| r.d == 12 && r.strategy == strategy).unwrap();
        assert_eq!(full.mean.to_bits(), record.summary.mean.to_bits());
        assert_eq!(full.std, 0.0);
    }

    let mut csv = Vec::new();
    write_curve_csv(&analysis.rows, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("d,strategy,mean,std,runs"));
    assert_eq!(lines.count(), analysis.rows.len());
}

#[test]
fn analyze_instance_mismatch_lists_ids() {
    let dir = TempDir::new().unwrap();
    let (a, mut b) = eval_pair(dir.path(), 3, 2);
    b.instances[0].id = "extra".into();
    match cmd_analyze(&a, &b, Some(2), None) {
        Err(Error::Input(msg)) => assert!(msg.contains("extra") && msg.contains("q0"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

fn oracle_config(dir: &Path, probs: Vec<f64>, max_len: usize) -> OracleConfig {
    let vocab = arsample::lm::Vocab::new(vec!["A".into(), "B".into(), "</s>".into()], 2).unwrap();
    let model = ExplicitTableModel::stationary(vocab, probs).unwrap();
    write_table(dir, "stationary.json", &model);
    OracleConfig::from_value(
        json!({"model": {"kind": "explicit-table", "path": "stationary.json"}, "max_len": max_len}),
        dir,
    )
    .unwrap()
}

#[test]
fn oracle_command_outcomes() {
    let dir = TempDir::new().unwrap();
    let report = cmd_oracle(&oracle_config(dir.path(), vec![0.5, 0.3, 0.2], 3)).unwrap();
    assert!(report.passed());
    assert_eq!(report.codes_checked, 1000);

    let report = cmd_oracle(&oracle_config(dir.path(), vec![0.0, 0.0, 1.0], 3)).unwrap();
    assert!(report.passed());
    assert_eq!(report.entries, 1);

    let mut big = oracle_config(dir.path(), vec![0.5, 0.3, 0.2], 3);
    big.cap = 20;
    let err = cmd_oracle(&big).unwrap_err();
    assert!(matches!(err, Error::Resource(_)));
    assert!(err.to_string().contains("smaller"));
}

#[test]
fn ttest_command() {
    let a = parse_numbers("1 2 3 4").unwrap();
    let b = parse_numbers("1,2,3,4").unwrap();
    let r = cmd_ttest(&a, &b).unwrap();
    assert_eq!((r.t, r.p), (0.0, 1.0));
    assert!(cmd_ttest(&a, &b[..3]).is_err());
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_arsample"))
}

#[test]
fn binary_exit_codes_and_outputs() {
    let dir = TempDir::new().unwrap();
    let v = reasoning_setup(dir.path(), 3, vec![1.0, 0.0, 0.0]);
    let cfg = dir.path().join("config.json");
    write_json(&cfg, &v);
    let record = dir.path().join("run.json");

    let out = binary()
        .args(["eval", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&record)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "accuracy=1.0000 ± 0.0000");

    let out = binary()
        .args(["sample", "--n", "2", "--strategy", "ancestral", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 6);

    let out = binary()
        .args(["sample", "--dataset", "/nonexistent/data.jsonl", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/data.jsonl"));

    let out = binary()
        .args(["analyze", "--arithmetic"])
        .arg(&record)
        .arg("--ancestral")
        .arg(&record)
        .args(["--runs", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("d,strategy,mean,std,runs"));

    let out = binary()
        .args(["oracle", "--max-len", "2", "--prompt", "q1", "--model"])
        .arg(dir.path().join("model.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let out = binary().args(["sample", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    fs::write(dir.path().join("a.txt"), "0.9 0.8 0.7").unwrap();
    fs::write(dir.path().join("b.txt"), "0.8 0.7 0.7").unwrap();
    let out = binary()
        .arg("ttest")
        .arg(dir.path().join("a.txt"))
        .arg(dir.path().join("b.txt"))
        .output()
        .unwrap();
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["dof"], json!(2));
    assert!((r["t"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}

/// Rows that skip renormalization, as a broken transform would produce.
struct Unnormalized(arsample::lm::Vocab);

impl arsample::lm::LanguageModel for Unnormalized {
    fn vocab(&self) -> &arsample::lm::Vocab {
        &self.0
    }

    fn next_distribution(&self, _: &[usize]) -> arsample::Result<arsample::lm::TokenDistribution> {
        Ok(arsample::lm::TokenDistribution::new_unchecked(vec![0.6, 0.3, 0.3]))
    }
}

#[test]
fn corrupted_distribution_fails_with_exit_one() {
    let vocab = arsample::lm::Vocab::new(vec!["A".into(), "B".into(), "</s>".into()], 2).unwrap();
    let opts = arsample::sampler::DecodeOptions::new(3);
    let report = arsample::oracle::check_codebook(&Unnormalized(vocab), &opts, 1000, 0, 1000).unwrap();
    assert!(!report.passed());
    let err = report.into_result().unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(matches!(err, Error::Invariant { ref name, .. } if name == "mass"), "{err}");
}

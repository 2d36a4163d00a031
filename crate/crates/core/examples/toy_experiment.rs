// Writes a model table, dataset and config for the synthetic reasoning
// task, then runs `eval` for both strategies and `analyze` on the records.
//
// `cargo run --example toy_experiment -- DIR` leaves the files in `DIR` for
// use with the `arsample` binary.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use arsample::experiment::{cmd_analyze, cmd_eval, write_curve_csv, ExperimentConfig};
use arsample::toy::ReasoningTask;
use arsample::Result;

pub fn write_files(dir: &Path, questions: usize) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let task = ReasoningTask::three_answer(questions);
    let table = task.to_table_model()?.to_table();
    fs::write(dir.join("model.json"), serde_json::to_string_pretty(&table)?)?;

    let lines: Vec<String> = (0..questions)
        .map(|q| json!({"id": format!("q{q}"), "prompt": [format!("q{q}")], "gold": task.gold(q)}).to_string())
        .collect();
    fs::write(dir.join("dataset.jsonl"), lines.join("\n") + "\n")?;

    let config = json!({
        "model": {"kind": "explicit-table", "path": "model.json"},
        "strategy": "arithmetic",
        "n": 20,
        "master_seed": 1,
        "max_len": task.max_len(),
        "task": "consistency",
        "dataset": "dataset.jsonl",
        "extractor": {"kind": "last-token"},
        "subsample": {"runs": 20, "seed": 0}
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&config)?)?;
    Ok(path)
}

pub fn run_in(dir: &Path) -> Result<()> {
    let config_path = write_files(dir, 30)?;
    let arithmetic = ExperimentConfig::load(&config_path)?;
    let mut ancestral = arithmetic.clone();
    ancestral.strategy = arsample::sampler::Strategy::Ancestral;

    let a = cmd_eval(&arithmetic)?;
    let b = cmd_eval(&ancestral)?;
    println!("arithmetic {}", a.summary);
    println!("ancestral  {}", b.summary);
    a.save(&dir.join("arithmetic.json"))?;
    b.save(&dir.join("ancestral.json"))?;

    let analysis = cmd_analyze(&a, &b, None, None)?;
    write_curve_csv(&analysis.rows, std::io::stdout().lock())?;
    println!("paired t-test at d=N: t={:.3} p={:.3}", analysis.ttest.t, analysis.ttest.p);
    Ok(())
}

pub fn run_example() -> Result<()> {
    run_in(&std::env::temp_dir().join("arsample-toy-experiment"))
}

#[allow(dead_code)]
fn main() {
    let result = match std::env::args().nth(1) {
        Some(dir) => run_in(Path::new(&dir)),
        None => run_example(),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

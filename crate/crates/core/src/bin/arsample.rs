use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use arsample::experiment::{
    cmd_analyze, cmd_eval, cmd_oracle, cmd_sample, cmd_ttest, config_dir, load_config_value, parse_numbers,
    write_curve_csv, ExperimentConfig, OracleConfig, RunRecord,
};
use arsample::{Error, Result};

#[derive(Parser)]
#[command(name = "arsample", version, about = "Arithmetic and ancestral sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples for every dataset instance as JSON lines.
    Sample {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample, score and write a run record; prints `metric=mean ± std`.
    Eval {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Run record path; the record goes to stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Subsampling curves and a paired t-test from two run records.
    Analyze {
        #[arg(long)]
        arithmetic: PathBuf,
        #[arg(long)]
        ancestral: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check codebook invariants on an enumerable model.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        /// Prompt tokens, space separated.
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long)]
        codes: Option<usize>,
        #[arg(long)]
        code_seed: Option<u64>,
        #[arg(long)]
        cap: Option<u64>,
    },
    /// Paired t-test on two files of numbers.
    Ttest { a: PathBuf, b: PathBuf },
}

/// Flags shared by every command that builds a model.
#[derive(Args)]
struct CommonArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model table path, or an inline JSON model spec.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    vocab_perm_seed: Option<u64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    top_p: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// arithmetic | ancestral
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// consistency | mbr | diversity
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// last-token | full-sequence | a regex with one capture group
    #[arg(long)]
    extractor: Option<String>,
    /// ngram-f | exact-match
    #[arg(long)]
    utility: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    subsample_seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

fn absolute(path: &Path) -> Result<String> {
    Ok(std::env::current_dir()?.join(path).display().to_string())
}

fn object(v: &mut Value) -> &mut Map<String, Value> {
    if !v.is_object() {
        *v = Value::Object(Map::new());
    }
    v.as_object_mut().expect("object")
}

impl CommonArgs {
    /// Loaded config with flag overrides, and the directory relative paths
    /// resolve against.
    fn merged(&self) -> Result<(Value, PathBuf)> {
        let (mut value, base) = match &self.config {
            Some(path) => (load_config_value(path)?, config_dir(path)),
            None => (json!({}), PathBuf::new()),
        };
        let map = object(&mut value);
        if let Some(m) = &self.model {
            let spec = if m.trim_start().starts_with('{') {
                serde_json::from_str(m)?
            } else {
                json!({"kind": "explicit-table", "path": absolute(Path::new(m))?})
            };
            map.insert("model".into(), spec);
        }
        set(map, "max_len", self.max_len);
        set(map, "vocab_perm_seed", self.vocab_perm_seed);
        let transforms = object(map.entry("transforms").or_insert(json!({})));
        set(transforms, "temperature", self.temperature);
        set(transforms, "top_k", self.top_k);
        set(transforms, "top_p", self.top_p);
        set(transforms, "epsilon", self.epsilon);
        Ok((value, base))
    }
}

fn set<T: Into<Value>>(map: &mut Map<String, Value>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        map.insert(key.into(), v.into());
    }
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let (mut value, base) = self.common.merged()?;
        let map = object(&mut value);
        set(map, "strategy", self.strategy.clone());
        set(map, "n", self.n);
        set(map, "master_seed", self.master_seed);
        set(map, "task", self.task.clone());
        if let Some(d) = &self.dataset {
            map.insert("dataset".into(), absolute(d)?.into());
        }
        if let Some(e) = &self.extractor {
            let spec = match e.as_str() {
                "last-token" | "full-sequence" => json!({"kind": e}),
                pattern => json!({"kind": "regex-capture", "pattern": pattern}),
            };
            map.insert("extractor".into(), spec);
        }
        set(map, "utility", self.utility.as_ref().map(|u| json!({"kind": u})));
        let subsample = object(map.entry("subsample").or_insert(json!({})));
        set(subsample, "runs", self.runs);
        set(subsample, "seed", self.subsample_seed);
        set(map, "workers", self.workers);
        ExperimentConfig::from_value(value, &base)
    }
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample { exp, out } => {
            let config = exp.config()?;
            let mut w = writer(out.as_deref())?;
            cmd_sample(&config, &mut w)?;
            w.flush()?;
        }
        Command::Eval { exp, out } => {
            let record = cmd_eval(&exp.config()?)?;
            for warning in &record.warnings {
                eprintln!("warning: {warning}");
            }
            match out {
                Some(path) => {
                    record.save(&path)?;
                    println!("{}", record.summary);
                }
                None => {
                    println!("{}", serde_json::to_string_pretty(&record)?);
                    eprintln!("{}", record.summary);
                }
            }
        }
        Command::Analyze { arithmetic, ancestral, runs, seed, out } => {
            let analysis = cmd_analyze(&RunRecord::load(&arithmetic)?, &RunRecord::load(&ancestral)?, runs, seed)?;
            let ttest = serde_json::to_string(&analysis.ttest)?;
            match out {
                Some(path) => {
                    write_curve_csv(&analysis.rows, File::create(path)?)?;
                    println!("{ttest}");
                }
                None => {
                    write_curve_csv(&analysis.rows, io::stdout().lock())?;
                    eprintln!("{ttest}");
                }
            }
        }
        Command::Oracle { common, prompt, codes, code_seed, cap } => {
            let (mut value, base) = common.merged()?;
            let map = object(&mut value);
            if let Some(p) = prompt {
                map.insert("prompt".into(), p.split_whitespace().collect::<Vec<_>>().into());
            }
            set(map, "codes", codes);
            set(map, "code_seed", code_seed);
            set(map, "cap", cap);
            let report = cmd_oracle(&OracleConfig::from_value(value, &base)?)?;
            println!("{}", serde_json::to_string(&report)?);
            let report = report.into_result()?;
            eprintln!("oracle passed: {} entries, {} codes", report.entries, report.codes_checked);
        }
        Command::Ttest { a, b } => {
            let read = |p: &Path| -> Result<Vec<f64>> {
                let text = std::fs::read_to_string(p).map_err(|e| match e.kind() {
                    io::ErrorKind::NotFound => Error::MissingFile(p.to_path_buf()),
                    _ => e.into(),
                })?;
                parse_numbers(&text)
            };
            let result = cmd_ttest(&read(&a)?, &read(&b)?)?;
            println!("{}", serde_json::to_string(&result)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // reader went away, e.g. `arsample sample ... | head`
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Experiment configs, datasets, run records and the operations behind the
//! `arsample` subcommands.
//!
//! Every command is a plain function so it can be driven from tests and
//! examples as well as from the binary.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::consistency::{is_correct, majority_vote, AnswerExtractor, ExtractorSpec};
use crate::error::{Error, Result};
use crate::lm::{read_file, LanguageModel, ModelSpec, TokenId, Vocab, DEFAULT_ENUMERATION_CAP};
use crate::mbr::{mbr_select, UtilityMetric, UtilitySpec};
use crate::metrics::{mean_std, ngram_diversity, paired_t_test, PairedTestResult};
use crate::oracle::{check_codebook, OracleReport};
use crate::sampler::{sample_batch, DecodeOptions, DecodedSample, SampleRecord, Strategy, VocabOrder};
use crate::seeds;
use crate::subsample::{subsample_curve, CurveRow, SubsamplePlan, DEFAULT_RUNS};
use crate::transforms::TransformChain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Consistency,
    Mbr,
    Diversity,
}

impl Task {
    pub fn metric_name(self) -> &'static str {
        match self {
            Task::Consistency => "accuracy",
            Task::Mbr => "utility",
            Task::Diversity => "diversity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsampleSettings {
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SubsampleSettings {
    fn default() -> Self {
        Self { runs: DEFAULT_RUNS, seed: 0 }
    }
}

fn default_runs() -> usize {
    DEFAULT_RUNS
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub transforms: TransformChain,
    pub strategy: Strategy,
    pub n: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub vocab_perm_seed: Option<u64>,
    pub max_len: usize,
    pub task: Task,
    pub dataset: PathBuf,
    #[serde(default)]
    pub extractor: Option<ExtractorSpec>,
    #[serde(default)]
    pub utility: Option<UtilitySpec>,
    #[serde(default)]
    pub subsample: SubsampleSettings,
    /// Sampling parallelism; does not affect any output.
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Deserializes `value`, reporting the failing field as a dotted path.
pub fn parse_config<T: serde::de::DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::Config {
            field: if path == "." { "<root>".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

/// Reads a JSON config file. Relative paths inside it resolve against the
/// file's directory.
pub fn load_config_value(path: &Path) -> Result<Value> {
    Ok(serde_json::from_str(&read_file(path)?)?)
}

pub fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl ExperimentConfig {
    pub fn from_value(value: Value, base_dir: &Path) -> Result<Self> {
        let mut config: Self = parse_config(value)?;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_value(load_config_value(path)?, &config_dir(path))
    }

    /// Field-level checks that need no I/O.
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::config("n", "must be >= 1"));
        }
        if self.max_len < 1 {
            return Err(Error::config("max_len", "must be >= 1"));
        }
        if self.workers < 1 {
            return Err(Error::config("workers", "must be >= 1"));
        }
        if self.subsample.runs < 1 {
            return Err(Error::config("subsample.runs", "must be >= 1"));
        }
        match self.task {
            Task::Consistency if self.extractor.is_none() => {
                Err(Error::config("extractor", "required for task `consistency`"))
            }
            Task::Mbr if self.utility.is_none() => Err(Error::config("utility", "required for task `mbr`")),
            _ => Ok(()),
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.base_dir.join(&self.dataset)
    }

    pub fn build_model(&self) -> Result<Box<dyn LanguageModel>> {
        self.model.build(&self.base_dir)
    }

    pub fn decode_options(&self) -> DecodeOptions {
        DecodeOptions::new(self.max_len)
            .with_chain(self.transforms.clone())
            .with_vocab_order(VocabOrder::from_seed(self.vocab_perm_seed))
    }

    /// Hex SHA-256 of the canonical JSON form, ignoring `workers`.
    pub fn hash(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Value::Object(map) = &mut value {
            map.remove("workers");
        }
        let digest = Sha256::digest(serde_json::to_string(&value)?.as_bytes());
        Ok(hex::encode(digest))
    }
}

/// One dataset line after tokenization.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub prompt: Vec<TokenId>,
    pub gold: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetLine {
    id: Value,
    #[serde(default)]
    prompt: Option<Vec<String>>,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    gold: Option<String>,
}

/// Parses JSON lines `{"id", "prompt": [tokens] | "source": text, "gold"}`.
/// A `source` string is split on whitespace.
pub fn parse_dataset(text: &str, vocab: &Vocab) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |msg: String| Error::input(format!("dataset line {}: {msg}", lineno + 1));
        let raw: DatasetLine = serde_json::from_str(line).map_err(|e| at(e.to_string()))?;
        let id = match raw.id {
            Value::String(s) => s,
            Value::Number(n) => n.to_string(),
            other => return Err(at(format!("id must be a string or number, got {other}"))),
        };
        if !seen.insert(id.clone()) {
            return Err(at(format!("duplicate id {id:?}")));
        }
        let words: Vec<String> = match (raw.prompt, raw.source) {
            (Some(_), Some(_)) => return Err(at("give either `prompt` or `source`, not both".into())),
            (Some(p), None) => p,
            (None, Some(s)) => s.split_whitespace().map(str::to_string).collect(),
            (None, None) => Vec::new(),
        };
        let prompt = vocab.encode(&words).map_err(|e| at(e.to_string()))?;
        out.push(Instance { id, prompt, gold: raw.gold });
    }
    if out.is_empty() {
        return Err(Error::input("dataset has no instances"));
    }
    Ok(out)
}

pub fn load_dataset(path: &Path, vocab: &Vocab) -> Result<Vec<Instance>> {
    parse_dataset(&read_file(path)?, vocab)
}

/// `n` samples for every instance. Instance `i` uses master seed
/// `derive_seed(config.master_seed, i)`.
pub fn sample_instances(
    model: &dyn LanguageModel,
    config: &ExperimentConfig,
    instances: &[Instance],
) -> Result<Vec<Vec<DecodedSample>>> {
    let base = config.decode_options();
    instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let opts = base.clone().with_prompt(inst.prompt.clone());
            let seed = seeds::derive_seed(config.master_seed, i as u64);
            sample_batch(model, &opts, config.strategy, config.n, seed, config.workers)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLine {
    pub instance: String,
    pub index: usize,
    #[serde(flatten)]
    pub sample: SampleRecord,
}

/// Writes every sample as one JSON line.
pub fn cmd_sample(config: &ExperimentConfig, out: &mut dyn Write) -> Result<usize> {
    config.validate()?;
    let model = config.build_model()?;
    let instances = load_dataset(&config.dataset_path(), model.vocab())?;
    let pools = sample_instances(model.as_ref(), config, &instances)?;
    let mut written = 0;
    for (inst, pool) in instances.iter().zip(&pools) {
        for (index, s) in pool.iter().enumerate() {
            let line = SampleLine {
                instance: inst.id.clone(),
                index,
                sample: s.to_record(model.vocab()),
            };
            serde_json::to_writer(&mut *out, &line)?;
            out.write_all(b"\n")?;
            written += 1;
        }
    }
    Ok(written)
}

/// Per-instance metric for a task, shared by `eval` and `analyze`.
#[derive(Debug)]
pub enum Scorer {
    Consistency(AnswerExtractor),
    Mbr(UtilityMetric),
    Diversity,
}

/// A scored pool: metric value, decision and an optional warning.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub metric: f64,
    pub decision: Option<String>,
    pub warning: Option<String>,
}

impl Scorer {
    pub fn from_config(config: &ExperimentConfig, vocab: &Vocab) -> Result<Self> {
        Ok(match config.task {
            Task::Consistency => Scorer::Consistency(
                config
                    .extractor
                    .as_ref()
                    .ok_or_else(|| Error::config("extractor", "required for task `consistency`"))?
                    .build()?,
            ),
            Task::Mbr => Scorer::Mbr(
                config
                    .utility
                    .as_ref()
                    .ok_or_else(|| Error::config("utility", "required for task `mbr`"))?
                    .build(vocab)?,
            ),
            Task::Diversity => Scorer::Diversity,
        })
    }

    pub fn score(&self, vocab: &Vocab, instance: &Instance, samples: &[DecodedSample]) -> Result<Scored> {
        let gold = || {
            instance
                .gold
                .as_deref()
                .ok_or_else(|| Error::input(format!("instance {:?} has no gold answer", instance.id)))
        };
        match self {
            Scorer::Consistency(extractor) => match majority_vote(samples, extractor, vocab) {
                Ok(vote) => Ok(Scored {
                    metric: if is_correct(&vote, gold()?) { 1.0 } else { 0.0 },
                    decision: Some(vote.winner),
                    warning: None,
                }),
                Err(Error::EmptyVote(n)) => Ok(Scored {
                    metric: 0.0,
                    decision: None,
                    warning: Some(format!(
                        "instance {:?}: all {n} samples abstained; counted as incorrect",
                        instance.id
                    )),
                }),
                Err(e) => Err(e),
            },
            Scorer::Mbr(metric) => {
                let words: Vec<&str> = gold()?.split_whitespace().collect();
                let reference = vocab
                    .encode(&words)
                    .map_err(|e| Error::input(format!("gold of instance {:?}: {e}", instance.id)))?;
                let candidates: Vec<&[TokenId]> = samples.iter().map(|s| s.content(vocab)).collect();
                let result = mbr_select(&candidates, metric)?;
                let winner = candidates[result.winner];
                Ok(Scored {
                    metric: metric.score(&reference, winner)?,
                    decision: Some(vocab.detokenize(winner)),
                    warning: None,
                })
            }
            Scorer::Diversity => {
                let contents: Vec<&[TokenId]> = samples.iter().map(|s| s.content(vocab)).collect();
                Ok(Scored {
                    metric: ngram_diversity(&contents)?.d,
                    decision: None,
                    warning: None,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabRecord {
    pub tokens: Vec<String>,
    pub eos: TokenId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    #[serde(default)]
    pub prompt: Vec<String>,
    pub gold: Option<String>,
    pub samples: Vec<SampleRecord>,
    pub metric: f64,
    pub decision: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub metric: String,
    pub mean: f64,
    /// Population std across instances.
    pub std: f64,
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}={:.4} ± {:.4}", self.metric, self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub vocab: VocabRecord,
    pub instances: Vec<InstanceRecord>,
    pub summary: Summary,
    pub warnings: Vec<String>,
    pub duration_secs: f64,
}

impl RunRecord {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&read_file(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn vocab(&self) -> Result<Vocab> {
        Vocab::new(self.vocab.tokens.clone(), self.vocab.eos)
    }

    /// Instances and their sample pools, decoded against the stored vocab.
    pub fn pools(&self) -> Result<(Vocab, Vec<Instance>, Vec<Vec<DecodedSample>>)> {
        let vocab = self.vocab()?;
        let mut instances = Vec::with_capacity(self.instances.len());
        let mut pools = Vec::with_capacity(self.instances.len());
        for r in &self.instances {
            instances.push(Instance {
                id: r.id.clone(),
                prompt: vocab.encode(&r.prompt)?,
                gold: r.gold.clone(),
            });
            pools.push(
                r.samples
                    .iter()
                    .cloned()
                    .map(|s| s.into_sample(&vocab))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok((vocab, instances, pools))
    }
}

/// Samples every instance, scores it and returns the run record.
pub fn cmd_eval(config: &ExperimentConfig) -> Result<RunRecord> {
    let start = Instant::now();
    config.validate()?;
    let model = config.build_model()?;
    let vocab = model.vocab().clone();
    let instances = load_dataset(&config.dataset_path(), &vocab)?;
    let scorer = Scorer::from_config(config, &vocab)?;
    let pools = sample_instances(model.as_ref(), config, &instances)?;

    let mut records = Vec::with_capacity(instances.len());
    let mut warnings = Vec::new();
    for (inst, pool) in instances.iter().zip(&pools) {
        let scored = scorer.score(&vocab, inst, pool)?;
        warnings.extend(scored.warning);
        records.push(InstanceRecord {
            id: inst.id.clone(),
            prompt: vocab.decode(&inst.prompt),
            gold: inst.gold.clone(),
            samples: pool.iter().map(|s| s.to_record(&vocab)).collect(),
            metric: scored.metric,
            decision: scored.decision,
        });
    }
    let values: Vec<f64> = records.iter().map(|r| r.metric).collect();
    let (mean, std) = mean_std(&values)?;
    Ok(RunRecord {
        config_hash: config.hash()?,
        config: config.clone(),
        vocab: VocabRecord {
            tokens: vocab.tokens().to_vec(),
            eos: vocab.eos(),
        },
        instances: records,
        summary: Summary {
            metric: config.task.metric_name().to_string(),
            mean,
            std,
        },
        warnings,
        duration_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub metric: String,
    pub rows: Vec<CurveRow>,
    /// Arithmetic minus ancestral, paired over instances at `d = N`.
    pub ttest: PairedTestResult,
}

/// Subsampling curves for both strategies plus a paired t-test on the
/// per-instance full-pool metrics. `runs` and `seed` default to the
/// arithmetic record's subsample settings.
pub fn cmd_analyze(
    arithmetic: &RunRecord,
    ancestral: &RunRecord,
    runs: Option<usize>,
    seed: Option<u64>,
) -> Result<Analysis> {
    let (a_cfg, b_cfg) = (&arithmetic.config, &ancestral.config);
    if a_cfg.task != b_cfg.task {
        return Err(Error::input(format!(
            "records are for different tasks: {:?} and {:?}",
            a_cfg.task, b_cfg.task
        )));
    }
    if a_cfg.n != b_cfg.n {
        return Err(Error::input(format!("records have different n: {} and {}", a_cfg.n, b_cfg.n)));
    }
    let a_ids: BTreeSet<&str> = arithmetic.instances.iter().map(|r| r.id.as_str()).collect();
    let b_ids: BTreeSet<&str> = ancestral.instances.iter().map(|r| r.id.as_str()).collect();
    if a_ids != b_ids {
        let diff: Vec<&str> = a_ids.symmetric_difference(&b_ids).copied().collect();
        return Err(Error::input(format!("instance sets differ; ids in only one record: {diff:?}")));
    }

    let (vocab, instances, a_pools) = arithmetic.pools()?;
    let (b_vocab, b_instances, b_pools) = ancestral.pools()?;
    if b_vocab != vocab {
        return Err(Error::input("records use different vocabularies"));
    }
    let position: HashMap<&str, usize> = b_instances.iter().enumerate().map(|(i, x)| (x.id.as_str(), i)).collect();
    let b_pools: Vec<Vec<DecodedSample>> = instances
        .iter()
        .map(|x| b_pools[position[x.id.as_str()]].clone())
        .collect();

    let scorer = Scorer::from_config(a_cfg, &vocab)?;
    let metric_fn = |i: usize, sub: &[DecodedSample]| Ok(scorer.score(&vocab, &instances[i], sub)?.metric);
    let runs = runs.unwrap_or(a_cfg.subsample.runs);
    let seed = seed.unwrap_or(a_cfg.subsample.seed);

    let mut rows = Vec::new();
    let mut full = Vec::new();
    for (pools, strategy) in [(&a_pools, Strategy::Arithmetic), (&b_pools, Strategy::Ancestral)] {
        let plan = SubsamplePlan::new(a_cfg.n, runs, strategy, seed)?;
        rows.extend(subsample_curve(pools, &plan, metric_fn)?);
        full.push(
            pools
                .iter()
                .enumerate()
                .map(|(i, p)| metric_fn(i, p))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok(Analysis {
        metric: a_cfg.task.metric_name().to_string(),
        rows,
        ttest: paired_t_test(&full[0], &full[1])?,
    })
}

/// Writes `d,strategy,mean,std,runs` rows.
pub fn write_curve_csv(rows: &[CurveRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn default_codes() -> usize {
    1000
}

fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

/// Settings for `oracle`. Unknown fields are ignored so an experiment config
/// can be checked directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub transforms: TransformChain,
    pub max_len: usize,
    #[serde(default)]
    pub vocab_perm_seed: Option<u64>,
    #[serde(default)]
    pub prompt: Vec<String>,
    #[serde(default = "default_codes")]
    pub codes: usize,
    #[serde(default)]
    pub code_seed: u64,
    #[serde(default = "default_cap")]
    pub cap: u64,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl OracleConfig {
    pub fn from_value(value: Value, base_dir: &Path) -> Result<Self> {
        let mut config: Self = parse_config(value)?;
        config.base_dir = base_dir.to_path_buf();
        Ok(config)
    }
}

/// Codebook invariants and decode equivalence. Failed checks are listed in
/// the report; [`OracleReport::into_result`] turns them into an error.
pub fn cmd_oracle(config: &OracleConfig) -> Result<OracleReport> {
    let model = config.model.build(&config.base_dir)?;
    let prompt = model.vocab().encode(&config.prompt)?;
    let opts = DecodeOptions::new(config.max_len)
        .with_chain(config.transforms.clone())
        .with_vocab_order(VocabOrder::from_seed(config.vocab_perm_seed))
        .with_prompt(prompt);
    check_codebook(model.as_ref(), &opts, config.codes, config.code_seed, config.cap)
}

/// Parses numbers separated by whitespace or commas.
pub fn parse_numbers(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::input(format!("not a number: {s:?}")))
        })
        .collect()
}

pub fn cmd_ttest(a: &[f64], b: &[f64]) -> Result<PairedTestResult> {
    paired_t_test(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base_config() -> Value {
        json!({
            "model": {"kind": "explicit-table", "path": "m.json"},
            "strategy": "arithmetic",
            "n": 4,
            "max_len": 3,
            "task": "diversity",
            "dataset": "d.jsonl"
        })
    }

    #[test]
    fn config_field_paths() {
        let mut v = base_config();
        v["n"] = json!("four");
        match ExperimentConfig::from_value(v, Path::new("")) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "n"),
            other => panic!("{other:?}"),
        }
        let mut v = base_config();
        v["transforms"] = json!({"temprature": 0.5});
        match ExperimentConfig::from_value(v, Path::new("")) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "transforms.temprature"),
            other => panic!("{other:?}"),
        }
        let mut v = base_config();
        v["task"] = json!("consistency");
        match ExperimentConfig::from_value(v, Path::new("")) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "extractor"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_tracks_meaningful_fields() {
        let a = ExperimentConfig::from_value(base_config(), Path::new("")).unwrap();
        let reparsed: ExperimentConfig =
            parse_config(serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap()).unwrap();
        assert_eq!(a.hash().unwrap(), reparsed.hash().unwrap());

        let mut workers = a.clone();
        workers.workers = 8;
        assert_eq!(a.hash().unwrap(), workers.hash().unwrap());

        for (field, value) in [("n", json!(5)), ("master_seed", json!(1)), ("transforms", json!({"top_k": 2}))] {
            let mut v = base_config();
            v[field] = value;
            let b = ExperimentConfig::from_value(v, Path::new("")).unwrap();
            assert_ne!(a.hash().unwrap(), b.hash().unwrap(), "{field}");
        }
    }

    #[test]
    fn dataset_parsing() {
        let vocab = Vocab::new(vec!["a".into(), "b".into(), "</s>".into()], 2).unwrap();
        let text = r#"{"id": 1, "prompt": ["a", "b"], "gold": "b"}

{"id": "x", "source": "b a"}
"#;
        let d = parse_dataset(text, &vocab).unwrap();
        assert_eq!(d[0], Instance { id: "1".into(), prompt: vec![0, 1], gold: Some("b".into()) });
        assert_eq!(d[1].prompt, vec![1, 0]);
        assert!(parse_dataset(r#"{"id": 1, "prompt": ["zz"]}"#, &vocab).is_err());
        assert!(parse_dataset("{\"id\": 1}\n{\"id\": 1}", &vocab).is_err());
        assert!(parse_dataset(r#"{"id": 1, "prompt": ["a"], "source": "a"}"#, &vocab).is_err());
        assert!(parse_dataset("", &vocab).is_err());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_numbers("1, 2\n3.5 ").unwrap(), vec![1.0, 2.0, 3.5]);
        assert!(parse_numbers("1 x").is_err());
    }
}

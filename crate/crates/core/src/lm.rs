//! Autoregressive model abstraction plus small deterministic models that are
//! cheap enough to enumerate exactly.
//!
//! Every sampler in this crate talks to a model through [`LanguageModel`],
//! which maps a token prefix to a [`TokenDistribution`] over a fixed
//! [`Vocab`]. Two local model families ship here:
//!
//! * [`ExplicitTableModel`]: rows of probabilities keyed by context, with
//!   suffix back-off. A single `""` row gives a stationary model.
//! * [`NgramModel`]: add-k smoothed n-gram counts with back-off.
//!
//! Remote models live in [`crate::remote`].

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = usize;

/// Tolerance on the total mass of a [`TokenDistribution`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Default cap on `vocab_size ^ max_len` for exact enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

pub const DEFAULT_EOS: &str = "</s>";

#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    eos: TokenId,
    index: HashMap<String, TokenId>,
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens && self.eos == other.eos
    }
}

impl Vocab {
    pub fn new(tokens: Vec<String>, eos: TokenId) -> Result<Self> {
        if tokens.len() < 2 {
            return Err(Error::input(format!(
                "vocabulary needs at least 2 tokens, got {}",
                tokens.len()
            )));
        }
        if eos >= tokens.len() {
            return Err(Error::input(format!(
                "eos index {eos} out of range for vocabulary of size {}",
                tokens.len()
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), id).is_some() {
                return Err(Error::input(format!("duplicate token {tok:?} in vocabulary")));
            }
        }
        Ok(Self { tokens, eos, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<TokenId>> {
        tokens
            .iter()
            .map(|t| {
                let t = t.as_ref();
                self.id(t)
                    .ok_or_else(|| Error::input(format!("unknown token {t:?}")))
            })
            .collect()
    }

    /// Token strings for `ids`. Panics on out-of-range ids; callers validate
    /// first.
    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter().map(|&id| self.tokens[id].clone()).collect()
    }

    /// Space-joined text of `ids` with eos tokens dropped.
    pub fn detokenize(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .filter(|&&id| id != self.eos)
            .map(|&id| self.tokens[id].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn check_ids(&self, ids: &[TokenId]) -> Result<()> {
        match ids.iter().find(|&&id| id >= self.len()) {
            Some(bad) => Err(Error::input(format!(
                "token id {bad} out of range for vocabulary of size {}",
                self.len()
            ))),
            None => Ok(()),
        }
    }
}

/// Probability vector over a vocabulary for one decoding step.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    probs: Vec<f64>,
}

impl TokenDistribution {
    /// Validates that `probs` is non-negative, finite and sums to 1 within
    /// [`MASS_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::input("empty distribution"));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::input(format!("invalid probability {bad}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::input(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::input(format!("invalid weight {bad}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::input("weights have no positive mass"));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Converts log-probabilities (up to an additive constant) into a
    /// distribution. Entries of `-inf` become zero.
    pub fn from_logprobs(logprobs: &[f64]) -> Result<Self> {
        if logprobs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::input("non-finite logprob"));
        }
        let max = logprobs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::input("all logprobs are -inf"));
        }
        Self::from_weights(logprobs.iter().map(|l| (l - max).exp()).collect())
    }

    /// Wraps `probs` without validation. Only for building deliberately
    /// malformed inputs in checks.
    #[doc(hidden)]
    pub fn new_unchecked(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// Highest-probability token, ties to the lower index.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn support(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, _)| i)
    }
}

/// An autoregressive model exposing next-token distributions.
///
/// Implementations must be deterministic and safe to call from many threads
/// at once.
pub trait LanguageModel: Send + Sync {
    fn vocab(&self) -> &Vocab;

    fn next_distribution(&self, prefix: &[TokenId]) -> Result<TokenDistribution>;
}

impl<M: LanguageModel + ?Sized> LanguageModel for Box<M> {
    fn vocab(&self) -> &Vocab {
        (**self).vocab()
    }

    fn next_distribution(&self, prefix: &[TokenId]) -> Result<TokenDistribution> {
        (**self).next_distribution(prefix)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for std::sync::Arc<M> {
    fn vocab(&self) -> &Vocab {
        (**self).vocab()
    }

    fn next_distribution(&self, prefix: &[TokenId]) -> Result<TokenDistribution> {
        (**self).next_distribution(prefix)
    }
}

/// Common precondition for `next_distribution`.
pub fn check_prefix(vocab: &Vocab, prefix: &[TokenId]) -> Result<()> {
    vocab.check_ids(prefix)?;
    if prefix.last() == Some(&vocab.eos()) {
        return Err(Error::input("prefix already ends in eos"));
    }
    Ok(())
}

/// On-disk form of an explicit-table model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableFile {
    pub vocab: Vec<String>,
    pub eos: TokenId,
    pub rows: BTreeMap<String, Vec<f64>>,
}

/// Model defined by explicit probability rows keyed by context.
///
/// A context key is the prefix's token strings joined by single spaces.
/// Lookup tries the whole prefix, then drops leading tokens one at a time,
/// ending with the empty key `""`.
#[derive(Debug, Clone)]
pub struct ExplicitTableModel {
    vocab: Vocab,
    rows: HashMap<Vec<TokenId>, TokenDistribution>,
    max_context: usize,
}

impl ExplicitTableModel {
    pub fn new(vocab: Vocab, rows: HashMap<Vec<TokenId>, TokenDistribution>) -> Result<Self> {
        for (ctx, row) in &rows {
            vocab.check_ids(ctx)?;
            if row.len() != vocab.len() {
                return Err(Error::input(format!(
                    "row for context {:?} has {} entries, vocabulary has {}",
                    vocab.detokenize(ctx),
                    row.len(),
                    vocab.len()
                )));
            }
        }
        let max_context = rows.keys().map(Vec::len).max().unwrap_or(0);
        Ok(Self {
            vocab,
            rows,
            max_context,
        })
    }

    /// Model that returns `probs` after every prefix.
    pub fn stationary(vocab: Vocab, probs: Vec<f64>) -> Result<Self> {
        let row = TokenDistribution::new(probs)?;
        Self::new(vocab, HashMap::from([(Vec::new(), row)]))
    }

    pub fn from_table(table: TableFile) -> Result<Self> {
        let vocab = Vocab::new(table.vocab, table.eos)?;
        let mut rows = HashMap::with_capacity(table.rows.len());
        for (key, probs) in table.rows {
            let ctx = vocab.encode(&key.split_whitespace().collect::<Vec<_>>())?;
            let row = TokenDistribution::new(probs)
                .map_err(|e| Error::input(format!("row {key:?}: {e}")))?;
            rows.insert(ctx, row);
        }
        Self::new(vocab, rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        Self::from_table(serde_json::from_str(&text)?)
    }

    pub fn to_table(&self) -> TableFile {
        TableFile {
            vocab: self.vocab.tokens().to_vec(),
            eos: self.vocab.eos(),
            rows: self
                .rows
                .iter()
                .map(|(ctx, row)| (self.vocab.detokenize(ctx), row.probs().to_vec()))
                .collect(),
        }
    }
}

impl LanguageModel for ExplicitTableModel {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_distribution(&self, prefix: &[TokenId]) -> Result<TokenDistribution> {
        check_prefix(&self.vocab, prefix)?;
        let longest = prefix.len().min(self.max_context);
        for len in (0..=longest).rev() {
            if let Some(row) = self.rows.get(&prefix[prefix.len() - len..]) {
                return Ok(row.clone());
            }
        }
        Err(Error::input(format!(
            "no table row matches context {:?}",
            self.vocab.detokenize(prefix)
        )))
    }
}

pub const DEFAULT_SMOOTHING: f64 = 0.1;

/// Add-k smoothed n-gram model with back-off to shorter contexts.
#[derive(Debug, Clone)]
pub struct NgramModel {
    vocab: Vocab,
    order: usize,
    smoothing: f64,
    // counts[m] maps a length-m context to next-token counts.
    counts: Vec<HashMap<Vec<TokenId>, Vec<f64>>>,
}

impl NgramModel {
    /// Trains on whitespace-tokenized lines. The vocabulary lists tokens in
    /// order of first appearance followed by `</s>`, which is appended to
    /// every line.
    pub fn train<S: AsRef<str>>(corpus: &[S], order: usize, smoothing: f64) -> Result<Self> {
        if !(1..=5).contains(&order) {
            return Err(Error::input(format!("n-gram order must be in 1..=5, got {order}")));
        }
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(Error::input(format!("smoothing must be > 0, got {smoothing}")));
        }
        let lines: Vec<Vec<&str>> = corpus
            .iter()
            .map(|l| l.as_ref().split_whitespace().collect::<Vec<_>>())
            .filter(|l| !l.is_empty())
            .collect();
        if lines.is_empty() {
            return Err(Error::input("empty corpus"));
        }

        let mut tokens: Vec<String> = Vec::new();
        let mut seen: HashMap<&str, TokenId> = HashMap::new();
        for tok in lines.iter().flatten() {
            if *tok == DEFAULT_EOS {
                return Err(Error::input(format!("corpus may not contain {DEFAULT_EOS}")));
            }
            if !seen.contains_key(tok) {
                seen.insert(tok, tokens.len());
                tokens.push((*tok).to_string());
            }
        }
        let eos = tokens.len();
        tokens.push(DEFAULT_EOS.to_string());
        let vocab = Vocab::new(tokens, eos)?;
        let v = vocab.len();

        let mut counts: Vec<HashMap<Vec<TokenId>, Vec<f64>>> = vec![HashMap::new(); order];
        for line in &lines {
            let mut ids: Vec<TokenId> = line.iter().map(|t| seen[t]).collect();
            ids.push(eos);
            for (pos, &next) in ids.iter().enumerate() {
                for (m, table) in counts.iter_mut().enumerate().take(pos.min(order - 1) + 1) {
                    let ctx = ids[pos - m..pos].to_vec();
                    table.entry(ctx).or_insert_with(|| vec![0.0; v])[next] += 1.0;
                }
            }
        }
        Ok(Self {
            vocab,
            order,
            smoothing,
            counts,
        })
    }

    pub fn load(corpus: &Path, order: usize, smoothing: f64) -> Result<Self> {
        let text = read_file(corpus)?;
        let lines: Vec<&str> = text.lines().collect();
        Self::train(&lines, order, smoothing)
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

impl LanguageModel for NgramModel {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_distribution(&self, prefix: &[TokenId]) -> Result<TokenDistribution> {
        check_prefix(&self.vocab, prefix)?;
        let v = self.vocab.len() as f64;
        let longest = prefix.len().min(self.order - 1);
        for m in (0..=longest).rev() {
            if let Some(row) = self.counts[m].get(&prefix[prefix.len() - m..]) {
                let total: f64 = row.iter().sum();
                let denom = total + self.smoothing * v;
                let probs = row.iter().map(|c| (c + self.smoothing) / denom).collect();
                return Ok(TokenDistribution::new_unchecked(probs));
            }
        }
        Ok(TokenDistribution::uniform(self.vocab.len()))
    }
}

/// Serializable description of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    ExplicitTable {
        path: PathBuf,
    },
    Ngram {
        corpus: PathBuf,
        order: usize,
        #[serde(default = "default_smoothing")]
        smoothing: f64,
    },
    Remote(crate::remote::RemoteSpec),
}

fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}

impl ModelSpec {
    /// Builds the model. Relative paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<Box<dyn LanguageModel>> {
        Ok(match self {
            ModelSpec::ExplicitTable { path } => {
                Box::new(ExplicitTableModel::load(&base.join(path))?)
            }
            ModelSpec::Ngram {
                corpus,
                order,
                smoothing,
            } => Box::new(NgramModel::load(&base.join(corpus), *order, *smoothing)?),
            ModelSpec::Remote(spec) => Box::new(crate::remote::RemoteModel::connect(spec)?),
        })
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

/// A complete or truncated sequence with its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSequence {
    pub tokens: Vec<TokenId>,
    pub prob: f64,
}

/// Every positive-probability continuation of length at most `max_len`.
///
/// Sequences end in eos, or are cut at exactly `max_len` tokens and carry
/// their prefix probability, so the returned masses partition 1.
pub fn enumerate_sequences(model: &dyn LanguageModel, max_len: usize) -> Result<Vec<WeightedSequence>> {
    enumerate_sequences_from(model, &[], max_len, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_sequences_from(
    model: &dyn LanguageModel,
    prompt: &[TokenId],
    max_len: usize,
    cap: u64,
) -> Result<Vec<WeightedSequence>> {
    check_enumeration_cap(model.vocab().len(), max_len, cap)?;
    let eos = model.vocab().eos();
    let mut out = Vec::new();
    let mut prefix = prompt.to_vec();
    expand(model, &mut prefix, prompt.len(), max_len, eos, 1.0, &mut out)?;
    Ok(out)
}

fn expand(
    model: &dyn LanguageModel,
    prefix: &mut Vec<TokenId>,
    prompt_len: usize,
    max_len: usize,
    eos: TokenId,
    mass: f64,
    out: &mut Vec<WeightedSequence>,
) -> Result<()> {
    let dist = model.next_distribution(prefix)?;
    for (tok, &p) in dist.probs().iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        prefix.push(tok);
        let generated = prefix.len() - prompt_len;
        if tok == eos || generated == max_len {
            out.push(WeightedSequence {
                tokens: prefix[prompt_len..].to_vec(),
                prob: mass * p,
            });
        } else {
            expand(model, prefix, prompt_len, max_len, eos, mass * p, out)?;
        }
        prefix.pop();
    }
    Ok(())
}

pub(crate) fn check_enumeration_cap(vocab_size: usize, max_len: usize, cap: u64) -> Result<()> {
    if max_len == 0 {
        return Err(Error::input("max_len must be >= 1"));
    }
    let size = u32::try_from(max_len)
        .ok()
        .and_then(|e| (vocab_size as u64).checked_pow(e));
    match size {
        Some(s) if s <= cap => Ok(()),
        _ => Err(Error::Resource(format!(
            "{vocab_size}^{max_len} sequences exceeds enumeration cap {cap}; use a smaller model or max_len"
        ))),
    }
}

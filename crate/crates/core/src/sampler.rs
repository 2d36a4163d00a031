//! Ancestral and arithmetic (codebook) sequence sampling.
//!
//! Arithmetic sampling treats a code `c` in `[0, 1)` as the address of one
//! sequence in a codebook: at each step the unit interval is partitioned into
//! consecutive sub-intervals, one per token in a (seeded) vocabulary order,
//! with widths equal to the transformed next-token probabilities. The token
//! whose interval holds the residual code is emitted and the residual is
//! rescaled into that interval. A single uniform code therefore yields an
//! exact sample from the model, while an evenly spaced [`CodeLattice`] of
//! codes spreads `n` samples across the codebook.
//!
//! Each sample depends only on its own code, so a batch is embarrassingly
//! parallel; [`sample_batch`] fans out over a rayon pool and gathers by index.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{check_enumeration_cap, LanguageModel, TokenDistribution, TokenId, Vocab, DEFAULT_ENUMERATION_CAP};
use crate::seeds;
use crate::transforms::TransformChain;

/// Selected-interval width below which the residual code is redrawn.
pub const REFRESH_THRESHOLD: f64 = 1e-12;

/// Largest `f64` strictly below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct CodePoint(f64);

impl CodePoint {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::input(format!("code point {value} outside [0, 1)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for CodePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        CodePoint::new(f64::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// `n` codes spaced `1/n` apart behind a shared random offset.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeLattice {
    offset: f64,
    points: Vec<CodePoint>,
}

impl CodeLattice {
    pub fn with_offset(n: usize, offset: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::input("lattice size must be >= 1"));
        }
        let step = 1.0 / n as f64;
        if !(0.0..step).contains(&offset) {
            return Err(Error::input(format!("offset {offset} outside [0, 1/{n})")));
        }
        let points = (0..n)
            .map(|i| CodePoint((offset + i as f64 / n as f64).min(BELOW_ONE)))
            .collect();
        Ok(Self { offset, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn points(&self) -> &[CodePoint] {
        &self.points
    }

    /// Lattice indices `shard, shard + num_shards, ...` with their codes.
    /// The shards of one lattice partition it.
    pub fn shard(&self, shard: usize, num_shards: usize) -> Vec<(usize, CodePoint)> {
        self.points
            .iter()
            .copied()
            .enumerate()
            .skip(shard)
            .step_by(num_shards.max(1))
            .collect()
    }
}

/// Randomly shifted lattice of `n` points; the offset is drawn from
/// `offset_seed`.
pub fn make_lattice(n: usize, offset_seed: u64) -> Result<CodeLattice> {
    if n < 1 {
        return Err(Error::input("lattice size must be >= 1"));
    }
    let offset = seeds::rng(offset_seed).gen::<f64>() / n as f64;
    // gen::<f64>() < 1, but the division can round up to exactly 1/n
    let offset = if offset * n as f64 >= 1.0 { 0.0 } else { offset };
    CodeLattice::with_offset(n, offset)
}

/// Order in which vocabulary tokens are laid out on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VocabOrder {
    #[default]
    Identity,
    Seeded(u64),
}

impl VocabOrder {
    pub fn from_seed(seed: Option<u64>) -> Self {
        seed.map_or(VocabOrder::Identity, VocabOrder::Seeded)
    }

    pub fn seed(self) -> Option<u64> {
        match self {
            VocabOrder::Identity => None,
            VocabOrder::Seeded(s) => Some(s),
        }
    }

    /// `perm[j]` is the token placed at position `j`.
    pub fn permutation(self, vocab_size: usize) -> Vec<TokenId> {
        let mut perm: Vec<TokenId> = (0..vocab_size).collect();
        if let VocabOrder::Seeded(seed) = self {
            perm.shuffle(&mut seeds::rng(seed));
        }
        perm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Arithmetic,
    Ancestral,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Arithmetic => "arithmetic",
            Strategy::Ancestral => "ancestral",
        })
    }
}

/// Everything about a decode except where its randomness comes from.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOptions {
    pub chain: TransformChain,
    pub max_len: usize,
    pub vocab_order: VocabOrder,
    /// Conditioning prefix; not part of the returned tokens.
    pub prompt: Vec<TokenId>,
}

impl DecodeOptions {
    pub fn new(max_len: usize) -> Self {
        Self {
            chain: TransformChain::identity(),
            max_len,
            vocab_order: VocabOrder::Identity,
            prompt: Vec::new(),
        }
    }

    pub fn with_chain(mut self, chain: TransformChain) -> Self {
        self.chain = chain;
        self
    }

    pub fn with_vocab_order(mut self, order: VocabOrder) -> Self {
        self.vocab_order = order;
        self
    }

    pub fn with_prompt(mut self, prompt: Vec<TokenId>) -> Self {
        self.prompt = prompt;
        self
    }

    fn validate(&self, vocab: &Vocab) -> Result<()> {
        if self.max_len < 1 {
            return Err(Error::input("max_len must be >= 1"));
        }
        crate::lm::check_prefix(vocab, &self.prompt)
    }
}

/// Where a sample's randomness came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Origin {
    Code(CodePoint),
    Seed(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSample {
    /// Generated tokens, ending in eos unless cut at `max_len`.
    pub tokens: Vec<TokenId>,
    /// Natural log of the product of transformed step probabilities.
    pub logprob: f64,
    pub origin: Origin,
    pub vocab_perm_seed: Option<u64>,
}

impl DecodedSample {
    pub fn code(&self) -> Option<CodePoint> {
        match self.origin {
            Origin::Code(c) => Some(c),
            Origin::Seed(_) => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.origin {
            Origin::Seed(s) => Some(s),
            Origin::Code(_) => None,
        }
    }

    /// Tokens with a trailing eos removed.
    pub fn content<'a>(&'a self, vocab: &Vocab) -> &'a [TokenId] {
        match self.tokens.split_last() {
            Some((&last, rest)) if last == vocab.eos() => rest,
            _ => &self.tokens,
        }
    }

    pub fn to_record(&self, vocab: &Vocab) -> SampleRecord {
        SampleRecord {
            tokens: vocab.decode(&self.tokens),
            token_ids: self.tokens.clone(),
            logprob: self.logprob,
            code: self.code(),
            seed: self.seed(),
            vocab_perm_seed: self.vocab_perm_seed,
        }
    }
}

/// JSON-lines form of a [`DecodedSample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub tokens: Vec<String>,
    pub token_ids: Vec<TokenId>,
    pub logprob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CodePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub vocab_perm_seed: Option<u64>,
}

impl SampleRecord {
    pub fn into_sample(self, vocab: &Vocab) -> Result<DecodedSample> {
        vocab.check_ids(&self.token_ids)?;
        let origin = match (self.code, self.seed) {
            (Some(c), None) => Origin::Code(c),
            (None, Some(s)) => Origin::Seed(s),
            _ => {
                return Err(Error::input(
                    "sample record must carry exactly one of `code` and `seed`",
                ))
            }
        };
        Ok(DecodedSample {
            tokens: self.token_ids,
            logprob: self.logprob,
            origin,
            vocab_perm_seed: self.vocab_perm_seed,
        })
    }
}

/// Cumulative upper bounds of each permuted position. The last position with
/// positive mass is pinned to 1 so the bounds always cover `[0, 1)`.
pub(crate) fn partition_bounds(dist: &TokenDistribution, perm: &[TokenId]) -> Vec<f64> {
    let probs = dist.probs();
    let mut bounds = Vec::with_capacity(perm.len());
    let mut acc = 0.0;
    let mut last_positive = None;
    for (pos, &tok) in perm.iter().enumerate() {
        if probs[tok] > 0.0 {
            acc += probs[tok];
            last_positive = Some(pos);
        }
        bounds.push(acc);
    }
    if let Some(last) = last_positive {
        for b in &mut bounds[last..] {
            *b = 1.0;
        }
    }
    bounds
}

/// Position `j` with `bounds[j-1] <= r < bounds[j]`; a code on a shared edge
/// goes to the right-hand token.
pub(crate) fn select_position(bounds: &[f64], r: f64) -> usize {
    bounds.partition_point(|&q| q <= r).min(bounds.len() - 1)
}

fn step_distribution(
    model: &dyn LanguageModel,
    chain: &TransformChain,
    prefix: &[TokenId],
) -> Result<TokenDistribution> {
    chain.apply(&model.next_distribution(prefix)?)
}

/// Decodes the sequence addressed by `code`.
pub fn arithmetic_decode(
    model: &dyn LanguageModel,
    opts: &DecodeOptions,
    code: CodePoint,
) -> Result<DecodedSample> {
    let vocab = model.vocab();
    opts.validate(vocab)?;
    let perm = opts.vocab_order.permutation(vocab.len());
    let mut prefix = opts.prompt.clone();
    let mut residual = code.value();
    let mut logprob = 0.0;

    for step in 0..opts.max_len {
        let dist = step_distribution(model, &opts.chain, &prefix)?;
        let bounds = partition_bounds(&dist, &perm);
        let pos = select_position(&bounds, residual);
        let lo = if pos == 0 { 0.0 } else { bounds[pos - 1] };
        let width = bounds[pos] - lo;
        let tok = perm[pos];
        logprob += dist.probs()[tok].ln();
        prefix.push(tok);
        if tok == vocab.eos() {
            break;
        }
        residual = if width < REFRESH_THRESHOLD {
            let key = seeds::derive_seed(code.value().to_bits(), step as u64);
            seeds::rng(key).gen::<f64>()
        } else {
            ((residual - lo) / width).clamp(0.0, BELOW_ONE)
        };
    }

    Ok(DecodedSample {
        tokens: prefix.split_off(opts.prompt.len()),
        logprob,
        origin: Origin::Code(code),
        vocab_perm_seed: opts.vocab_order.seed(),
    })
}

/// Standard token-by-token sampling driven by a PRNG stream keyed by `seed`.
pub fn ancestral_decode(
    model: &dyn LanguageModel,
    opts: &DecodeOptions,
    seed: u64,
) -> Result<DecodedSample> {
    let vocab = model.vocab();
    opts.validate(vocab)?;
    let perm = opts.vocab_order.permutation(vocab.len());
    let mut rng = seeds::rng(seed);
    let mut prefix = opts.prompt.clone();
    let mut logprob = 0.0;

    for _ in 0..opts.max_len {
        let dist = step_distribution(model, &opts.chain, &prefix)?;
        let bounds = partition_bounds(&dist, &perm);
        let tok = perm[select_position(&bounds, rng.gen::<f64>())];
        logprob += dist.probs()[tok].ln();
        prefix.push(tok);
        if tok == vocab.eos() {
            break;
        }
    }

    Ok(DecodedSample {
        tokens: prefix.split_off(opts.prompt.len()),
        logprob,
        origin: Origin::Seed(seed),
        vocab_perm_seed: opts.vocab_order.seed(),
    })
}

/// Decodes sample `index` of an `n`-sample batch.
fn decode_index(
    model: &dyn LanguageModel,
    opts: &DecodeOptions,
    strategy: Strategy,
    lattice: Option<&CodeLattice>,
    master_seed: u64,
    index: usize,
) -> Result<DecodedSample> {
    let out = match (strategy, lattice) {
        (Strategy::Arithmetic, Some(lattice)) => arithmetic_decode(model, opts, lattice.points()[index]),
        _ => ancestral_decode(model, opts, seeds::derive_seed(master_seed, index as u64)),
    };
    out.map_err(|e| Error::Batch {
        index,
        source: Box::new(e),
    })
}

/// `n` samples ordered by index. Arithmetic samples decode the points of one
/// lattice drawn from `master_seed`; ancestral sample `i` uses a seed derived
/// from `(master_seed, i)`. The result does not depend on `workers`.
pub fn sample_batch(
    model: &dyn LanguageModel,
    opts: &DecodeOptions,
    strategy: Strategy,
    n: usize,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<DecodedSample>> {
    if n < 1 || workers < 1 {
        return Err(Error::input("sample_batch needs n >= 1 and workers >= 1"));
    }
    opts.validate(model.vocab())?;
    let lattice = match strategy {
        Strategy::Arithmetic => Some(make_lattice(n, master_seed)?),
        Strategy::Ancestral => None,
    };
    let run = |i| decode_index(model, opts, strategy, lattice.as_ref(), master_seed, i);
    if workers == 1 {
        return (0..n).map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::input(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(run).collect())
}

/// The slice of an `n`-sample batch owned by `shard` out of `num_shards`:
/// indices `shard, shard + num_shards, ...`, paired with their samples.
/// Concatenating all shards reproduces [`sample_batch`].
pub fn sample_shard(
    model: &dyn LanguageModel,
    opts: &DecodeOptions,
    strategy: Strategy,
    n: usize,
    master_seed: u64,
    shard: usize,
    num_shards: usize,
) -> Result<Vec<(usize, DecodedSample)>> {
    if n < 1 || num_shards < 1 || shard >= num_shards {
        return Err(Error::input(format!(
            "invalid shard {shard} of {num_shards} for n = {n}"
        )));
    }
    let lattice = match strategy {
        Strategy::Arithmetic => Some(make_lattice(n, master_seed)?),
        Strategy::Ancestral => None,
    };
    (shard..n)
        .step_by(num_shards)
        .map(|i| Ok((i, decode_index(model, opts, strategy, lattice.as_ref(), master_seed, i)?)))
        .collect()
}

/// One sequence and the half-open sub-interval of `[0, 1)` it owns.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookEntry {
    pub tokens: Vec<TokenId>,
    pub lo: f64,
    pub hi: f64,
}

impl CodebookEntry {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, c: f64) -> bool {
        self.lo <= c && c < self.hi
    }
}

/// Full codebook by depth-first expansion in permuted vocabulary order.
/// Entries come out sorted by `lo`, are disjoint and cover `[0, 1)`.
pub fn enumerate_codebook(model: &dyn LanguageModel, opts: &DecodeOptions) -> Result<Vec<CodebookEntry>> {
    enumerate_codebook_capped(model, opts, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_codebook_capped(
    model: &dyn LanguageModel,
    opts: &DecodeOptions,
    cap: u64,
) -> Result<Vec<CodebookEntry>> {
    let vocab = model.vocab();
    opts.validate(vocab)?;
    check_enumeration_cap(vocab.len(), opts.max_len, cap)?;
    let walker = CodebookWalker {
        model,
        opts,
        perm: opts.vocab_order.permutation(vocab.len()),
        eos: vocab.eos(),
    };
    let mut out = Vec::new();
    let mut prefix = opts.prompt.clone();
    walker.expand(&mut prefix, 0.0, 1.0, &mut out)?;
    Ok(out)
}

struct CodebookWalker<'a> {
    model: &'a dyn LanguageModel,
    opts: &'a DecodeOptions,
    perm: Vec<TokenId>,
    eos: TokenId,
}

impl CodebookWalker<'_> {
    fn expand(&self, prefix: &mut Vec<TokenId>, lo: f64, hi: f64, out: &mut Vec<CodebookEntry>) -> Result<()> {
        let dist = step_distribution(self.model, &self.opts.chain, prefix)?;
        let bounds = partition_bounds(&dist, &self.perm);
        let width = hi - lo;
        let mut child_lo = lo;
        for (pos, &tok) in self.perm.iter().enumerate() {
            if dist.probs()[tok] <= 0.0 {
                continue;
            }
            let child_hi = if bounds[pos] >= 1.0 { hi } else { lo + width * bounds[pos] };
            prefix.push(tok);
            let generated = prefix.len() - self.opts.prompt.len();
            if tok == self.eos || generated == self.opts.max_len {
                out.push(CodebookEntry {
                    tokens: prefix[self.opts.prompt.len()..].to_vec(),
                    lo: child_lo,
                    hi: child_hi,
                });
            } else {
                self.expand(prefix, child_lo, child_hi, out)?;
            }
            prefix.pop();
            child_lo = child_hi;
        }
        Ok(())
    }
}

/// Index of the entry whose interval holds `c`, for a codebook sorted by
/// `lo` as returned by [`enumerate_codebook`].
pub fn locate(codebook: &[CodebookEntry], c: f64) -> Option<usize> {
    let idx = codebook.partition_point(|e| e.lo <= c);
    idx.checked_sub(1).filter(|&i| codebook[i].contains(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{ExplicitTableModel, Vocab};
    use crate::transforms::Transform;
    use approx::assert_abs_diff_eq;
    use std::collections::HashSet;

    fn abc_model(p: Vec<f64>) -> ExplicitTableModel {
        let vocab = Vocab::new(vec!["A".into(), "B".into(), "</s>".into()], 2).unwrap();
        ExplicitTableModel::stationary(vocab, p).unwrap()
    }

    #[test]
    fn lattice_points() {
        let l = CodeLattice::with_offset(4, 0.0).unwrap();
        let v: Vec<f64> = l.points().iter().map(|c| c.value()).collect();
        assert_eq!(v, vec![0.0, 0.25, 0.5, 0.75]);

        let l = make_lattice(1, 99).unwrap();
        assert_eq!(l.len(), 1);
        assert!((0.0..1.0).contains(&l.points()[0].value()));

        let l = make_lattice(7, 3).unwrap();
        for w in l.points().windows(2) {
            assert_abs_diff_eq!(w[1].value() - w[0].value(), 1.0 / 7.0, epsilon = 1e-12);
        }
        assert!(l.offset() < 1.0 / 7.0);

        assert!(make_lattice(0, 1).is_err());
        assert!(CodeLattice::with_offset(4, 0.25).is_err());
        assert_eq!(make_lattice(9, 5).unwrap(), make_lattice(9, 5).unwrap());
    }

    #[test]
    fn lattice_shards_partition() {
        let l = make_lattice(40, 1).unwrap();
        let mut seen: Vec<usize> = (0..8).flat_map(|s| l.shard(s, 8)).map(|(i, _)| i).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..40).collect::<Vec<_>>());
        assert_eq!(l.shard(3, 8).iter().map(|(i, _)| *i).collect::<Vec<_>>(), vec![3, 11, 19, 27, 35]);
    }

    #[test]
    fn first_step_residual() {
        let m = abc_model(vec![0.5, 0.3, 0.2]);
        let opts = DecodeOptions::new(1);
        let s = arithmetic_decode(&m, &opts, CodePoint::new(0.6).unwrap()).unwrap();
        assert_eq!(s.tokens, vec![1]);
        // residual after step 1 is (0.6 - 0.5) / 0.3
        let bounds = partition_bounds(&m.next_distribution(&[]).unwrap(), &[0, 1, 2]);
        let pos = select_position(&bounds, 0.6);
        assert_eq!(pos, 1);
        assert_abs_diff_eq!((0.6 - bounds[0]) / (bounds[1] - bounds[0]), 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn code_zero_takes_left_edges() {
        let vocab = Vocab::new(vec!["A".into(), "B".into(), "</s>".into()], 2).unwrap();
        let m = ExplicitTableModel::stationary(vocab, vec![0.0, 0.7, 0.3]).unwrap();
        let s = arithmetic_decode(&m, &DecodeOptions::new(3), CodePoint::new(0.0).unwrap()).unwrap();
        assert_eq!(s.tokens, vec![1, 1, 1]);
    }

    #[test]
    fn two_step_example() {
        let m = abc_model(vec![0.6, 0.3, 0.1]);
        let s = arithmetic_decode(&m, &DecodeOptions::new(2), CodePoint::new(0.55).unwrap()).unwrap();
        assert_eq!(s.tokens, vec![0, 2]);
        assert_abs_diff_eq!(s.logprob, (0.6f64 * 0.1).ln(), epsilon = 1e-12);
        assert_eq!(s.code().unwrap().value(), 0.55);
        assert_eq!(s.seed(), None);

        let book = enumerate_codebook(&m, &DecodeOptions::new(2)).unwrap();
        let e = &book[locate(&book, 0.55).unwrap()];
        assert_eq!(e.tokens, vec![0, 2]);
        assert_abs_diff_eq!(e.lo, 0.54, epsilon = 1e-12);
        assert_abs_diff_eq!(e.hi, 0.60, epsilon = 1e-12);
    }

    #[test]
    fn boundary_goes_right() {
        let m = abc_model(vec![0.5, 0.25, 0.25]);
        let s = arithmetic_decode(&m, &DecodeOptions::new(1), CodePoint::new(0.5).unwrap()).unwrap();
        assert_eq!(s.tokens, vec![1]);
    }

    #[test]
    fn zero_mass_tokens_unselectable() {
        let m = abc_model(vec![0.5, 0.0, 0.5]);
        for i in 0..100 {
            let c = CodePoint::new(i as f64 / 100.0).unwrap();
            let s = arithmetic_decode(&m, &DecodeOptions::new(4), c).unwrap();
            assert!(!s.tokens.contains(&1));
        }
    }

    #[test]
    fn refresh_keeps_decoding_deterministic() {
        // Sharpening leaves B with ~1e-13 mass, so a code just below 1 selects
        // it through an interval narrower than the refresh threshold.
        let m = abc_model(vec![0.6, 0.4, 0.0]);
        let chain = TransformChain::new(vec![Transform::Temperature(1.0 / 74.0)]).unwrap();
        let opts = DecodeOptions::new(6).with_chain(chain);
        let c = CodePoint::new(BELOW_ONE).unwrap();
        let a = arithmetic_decode(&m, &opts, c).unwrap();
        assert_eq!(a.tokens[0], 1);
        assert_eq!(a.tokens.len(), 6);
        assert_eq!(a, arithmetic_decode(&m, &opts, c).unwrap());
        assert!(a.logprob <= 0.0);
    }

    #[test]
    fn ancestral_forced_and_deterministic() {
        let m = abc_model(vec![0.0, 0.0, 1.0]);
        for seed in 0..20 {
            let s = ancestral_decode(&m, &DecodeOptions::new(5), seed).unwrap();
            assert_eq!(s.tokens, vec![2]);
            assert_eq!(s.logprob, 0.0);
        }
        let m = abc_model(vec![0.4, 0.4, 0.2]);
        let a = ancestral_decode(&m, &DecodeOptions::new(8), 17).unwrap();
        assert_eq!(a, ancestral_decode(&m, &DecodeOptions::new(8), 17).unwrap());
        assert_eq!(a.seed(), Some(17));
    }

    #[test]
    fn ancestral_single_step_frequency() {
        let m = abc_model(vec![0.6, 0.3, 0.1]);
        let opts = DecodeOptions::new(1);
        let hits = (0..10_000)
            .filter(|&s| ancestral_decode(&m, &opts, seeds::derive_seed(5, s)).unwrap().tokens[0] == 0)
            .count();
        let freq = hits as f64 / 10_000.0;
        assert!((freq - 0.6).abs() <= 0.015, "freq {freq}");
    }

    #[test]
    fn batch_workers_and_shards() {
        let m = abc_model(vec![0.45, 0.35, 0.2]);
        let opts = DecodeOptions::new(4).with_vocab_order(VocabOrder::Seeded(3));
        for strategy in [Strategy::Arithmetic, Strategy::Ancestral] {
            let one = sample_batch(&m, &opts, strategy, 40, 11, 1).unwrap();
            let eight = sample_batch(&m, &opts, strategy, 40, 11, 8).unwrap();
            assert_eq!(one, eight);
            let mut sharded: Vec<(usize, DecodedSample)> = (0..8)
                .flat_map(|s| sample_shard(&m, &opts, strategy, 40, 11, s, 8).unwrap())
                .collect();
            sharded.sort_by_key(|(i, _)| *i);
            let sharded: Vec<_> = sharded.into_iter().map(|(_, s)| s).collect();
            assert_eq!(sharded, one);
        }
        let two = sample_batch(&m, &opts, Strategy::Ancestral, 2, 0, 1).unwrap();
        assert_ne!(two[0].seed(), two[1].seed());
        let arith = sample_batch(&m, &opts, Strategy::Arithmetic, 5, 0, 2).unwrap();
        assert!(arith.iter().all(|s| s.code().is_some() && s.seed().is_none()));
    }

    #[test]
    fn batch_error_names_sample() {
        let m = abc_model(vec![0.5, 0.3, 0.2]);
        let opts = DecodeOptions::new(3).with_prompt(vec![9]);
        assert!(sample_batch(&m, &opts, Strategy::Arithmetic, 3, 0, 1).is_err());
        assert!(sample_batch(&m, &DecodeOptions::new(3), Strategy::Arithmetic, 0, 0, 1).is_err());
    }

    #[test]
    fn codebook_single_entry_for_forced_eos() {
        let m = abc_model(vec![0.0, 0.0, 1.0]);
        let book = enumerate_codebook(&m, &DecodeOptions::new(3)).unwrap();
        assert_eq!(book, vec![CodebookEntry { tokens: vec![2], lo: 0.0, hi: 1.0 }]);
    }

    #[test]
    fn vocab_permutation_is_seeded() {
        assert_eq!(VocabOrder::Identity.permutation(5), vec![0, 1, 2, 3, 4]);
        let a = VocabOrder::Seeded(1).permutation(50);
        assert_eq!(a, VocabOrder::Seeded(1).permutation(50));
        assert_ne!(a, VocabOrder::Seeded(2).permutation(50));
        let set: HashSet<_> = a.iter().collect();
        assert_eq!(set.len(), 50);

        let m = abc_model(vec![0.5, 0.3, 0.2]);
        let opts = DecodeOptions::new(3).with_vocab_order(VocabOrder::Seeded(4));
        assert_eq!(enumerate_codebook(&m, &opts).unwrap(), enumerate_codebook(&m, &opts).unwrap());
    }

    #[test]
    fn sample_record_round_trip() {
        let vocab = Vocab::new(vec!["A".into(), "B".into(), "</s>".into()], 2).unwrap();
        let s = DecodedSample {
            tokens: vec![0, 2],
            logprob: -1.5,
            origin: Origin::Code(CodePoint::new(0.25).unwrap()),
            vocab_perm_seed: Some(3),
        };
        let json = serde_json::to_string(&s.to_record(&vocab)).unwrap();
        assert_eq!(
            json,
            r#"{"tokens":["A","</s>"],"token_ids":[0,2],"logprob":-1.5,"code":0.25,"vocab_perm_seed":3}"#
        );
        let back: SampleRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_sample(&vocab).unwrap(), s);
        let bad: SampleRecord =
            serde_json::from_str(r#"{"tokens":[],"token_ids":[],"logprob":0,"vocab_perm_seed":null}"#).unwrap();
        assert!(bad.into_sample(&vocab).is_err());
    }
}

//! Exact correctness checks for arithmetic sampling on enumerable models.
//!
//! [`check_codebook`] compares three independent views of the same model:
//! the interval codebook, the sequence probabilities obtained by plain
//! products of transformed step probabilities, and the decoder itself run
//! on random codes.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lm::{check_enumeration_cap, LanguageModel, TokenId};
use crate::sampler::{arithmetic_decode, enumerate_codebook_capped, locate, CodePoint, CodeLattice, CodebookEntry, DecodeOptions};
use crate::seeds;

pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantFailure {
    pub name: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub entries: usize,
    pub total_width: f64,
    /// Sum of absolute gaps and overlaps between consecutive intervals,
    /// including the ends of `[0, 1)`.
    pub total_gap: f64,
    pub max_width_error: f64,
    pub codes_checked: usize,
    pub mismatches: usize,
    pub failures: Vec<InvariantFailure>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// `Err(Error::Invariant)` naming the first failed invariant.
    pub fn into_result(self) -> Result<Self> {
        match self.failures.first() {
            None => Ok(self),
            Some(f) => Err(Error::Invariant {
                name: f.name.to_string(),
                detail: f.detail.clone(),
            }),
        }
    }
}

/// Sequence probabilities as products of transformed step probabilities,
/// expanded in vocabulary-index order without any interval arithmetic.
pub fn transformed_sequence_probs(
    model: &dyn LanguageModel,
    opts: &DecodeOptions,
    cap: u64,
) -> Result<HashMap<Vec<TokenId>, f64>> {
    check_enumeration_cap(model.vocab().len(), opts.max_len, cap)?;
    let mut out = HashMap::new();
    let mut prefix = opts.prompt.clone();
    product_walk(model, opts, &mut prefix, 1.0, &mut out)?;
    Ok(out)
}

fn product_walk(
    model: &dyn LanguageModel,
    opts: &DecodeOptions,
    prefix: &mut Vec<TokenId>,
    mass: f64,
    out: &mut HashMap<Vec<TokenId>, f64>,
) -> Result<()> {
    let dist = opts.chain.apply(&model.next_distribution(prefix)?)?;
    let eos = model.vocab().eos();
    for (tok, &p) in dist.probs().iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        prefix.push(tok);
        if tok == eos || prefix.len() - opts.prompt.len() == opts.max_len {
            out.insert(prefix[opts.prompt.len()..].to_vec(), mass * p);
        } else {
            product_walk(model, opts, prefix, mass * p, out)?;
        }
        prefix.pop();
    }
    Ok(())
}

/// Runs every codebook invariant plus decode-versus-interval equivalence on
/// `n_codes` uniform codes drawn from `code_seed`.
pub fn check_codebook(
    model: &dyn LanguageModel,
    opts: &DecodeOptions,
    n_codes: usize,
    code_seed: u64,
    cap: u64,
) -> Result<OracleReport> {
    let book = enumerate_codebook_capped(model, opts, cap)?;
    let probs = transformed_sequence_probs(model, opts, cap)?;
    let mut failures = Vec::new();

    let total_gap = partition_gap(&book);
    if total_gap >= TOLERANCE {
        failures.push(InvariantFailure {
            name: "partition",
            detail: format!("intervals leave total gap/overlap {total_gap:e}"),
        });
    }
    if let Some(e) = book.iter().find(|e| !(e.lo < e.hi)) {
        failures.push(InvariantFailure {
            name: "partition",
            detail: format!("empty or inverted interval [{}, {}) for {:?}", e.lo, e.hi, e.tokens),
        });
    }

    let total_mass: f64 = probs.values().sum();
    if (total_mass - 1.0).abs() >= TOLERANCE {
        failures.push(InvariantFailure {
            name: "mass",
            detail: format!("sequence probabilities sum to {total_mass}"),
        });
    }

    let mut max_width_error: f64 = 0.0;
    for e in &book {
        let expected = probs.get(&e.tokens).copied().unwrap_or(0.0);
        max_width_error = max_width_error.max((e.width() - expected).abs());
    }
    if book.len() != probs.len() {
        failures.push(InvariantFailure {
            name: "width",
            detail: format!("codebook has {} entries, enumeration has {}", book.len(), probs.len()),
        });
    }
    if max_width_error >= TOLERANCE {
        failures.push(InvariantFailure {
            name: "width",
            detail: format!("interval width differs from sequence probability by {max_width_error:e}"),
        });
    }

    let mut rng = seeds::rng(code_seed);
    let mut mismatches = 0;
    let mut first_mismatch = None;
    for _ in 0..n_codes {
        let c = rng.gen::<f64>();
        let decoded = arithmetic_decode(model, opts, CodePoint::new(c)?)?;
        let entry = locate(&book, c).map(|i| &book[i].tokens);
        if entry != Some(&decoded.tokens) {
            mismatches += 1;
            first_mismatch.get_or_insert((c, decoded.tokens, entry.cloned()));
        }
    }
    if let Some((c, got, want)) = first_mismatch {
        failures.push(InvariantFailure {
            name: "decode-equivalence",
            detail: format!("{mismatches} of {n_codes} codes disagree; code {c} decoded {got:?}, codebook has {want:?}"),
        });
    }

    Ok(OracleReport {
        entries: book.len(),
        total_width: book.iter().map(CodebookEntry::width).sum(),
        total_gap,
        max_width_error,
        codes_checked: n_codes,
        mismatches,
        failures,
    })
}

fn partition_gap(book: &[CodebookEntry]) -> f64 {
    let Some(first) = book.first() else { return 1.0 };
    let mut gap = first.lo.abs();
    for w in book.windows(2) {
        gap += (w[1].lo - w[0].hi).abs();
    }
    gap + (1.0 - book[book.len() - 1].hi).abs()
}

/// Entries whose lattice hit count is outside `[floor(n w), ceil(n w)]`,
/// returned as `(entry index, hits, n * width)`.
pub fn stratification_violations(book: &[CodebookEntry], lattice: &CodeLattice) -> Vec<(usize, usize, f64)> {
    let mut hits = vec![0usize; book.len()];
    for c in lattice.points() {
        if let Some(i) = locate(book, c.value()) {
            hits[i] += 1;
        }
    }
    let n = lattice.len() as f64;
    book.iter()
        .zip(hits)
        .enumerate()
        .filter_map(|(i, (e, h))| {
            let expected = n * e.width();
            let lo = (expected - TOLERANCE).floor();
            let hi = (expected + TOLERANCE).ceil();
            (!(lo..=hi).contains(&(h as f64))).then_some((i, h, expected))
        })
        .collect()
}

//! Sampling-based minimum Bayes risk selection.
//!
//! The `N` samples serve both as candidates and as pseudo-references: each
//! candidate `h` is scored by its mean utility `(1/N) Σ_n u(y_n, h)` against
//! all samples, the self-term included, and the best-scoring candidate wins.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::Mutex;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lm::{TokenId, Vocab};
use crate::remote::{LineChannel, Transport, DEFAULT_TIMEOUT_MS};

/// Mean over `n = 1..=max_n` of the F1 between the n-gram multisets of `a`
/// and `b`, skipping orders where either side has no n-grams.
///
/// Equal sequences score 1 and a sequence against an empty one scores 0.
pub fn ngram_f_utility<T: Eq + Hash>(a: &[T], b: &[T], max_n: usize) -> f64 {
    if a == b {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    let mut eligible = 0usize;
    for n in 1..=max_n.max(1) {
        if a.len() < n || b.len() < n {
            break;
        }
        let ca = ngram_counts(a, n);
        let cb = ngram_counts(b, n);
        let overlap: usize = ca
            .iter()
            .map(|(g, &c)| c.min(cb.get(g).copied().unwrap_or(0)))
            .sum();
        let precision = overlap as f64 / (b.len() - n + 1) as f64;
        let recall = overlap as f64 / (a.len() - n + 1) as f64;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        total += f1;
        eligible += 1;
    }
    if eligible == 0 {
        0.0
    } else {
        total / eligible as f64
    }
}

fn ngram_counts<T: Eq + Hash>(seq: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    for w in seq.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

pub fn exact_match_utility<T: Eq>(a: &[T], b: &[T]) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Utility served by an external process over JSON lines:
/// `{"id":k,"a":[tokens],"b":[tokens]}` answered by `{"id":k,"u":float}`.
pub struct ExternalUtility {
    channel: Mutex<(LineChannel, u64)>,
    vocab: Vocab,
}

impl ExternalUtility {
    pub fn new(channel: LineChannel, vocab: Vocab) -> Self {
        Self {
            channel: Mutex::new((channel, 0)),
            vocab,
        }
    }

    pub fn connect(transport: &Transport, timeout: Duration, vocab: Vocab) -> Result<Self> {
        Ok(Self::new(LineChannel::open(transport, timeout)?, vocab))
    }

    pub fn score(&self, reference: &[TokenId], hypothesis: &[TokenId]) -> Result<f64> {
        let mut guard = self
            .channel
            .lock()
            .map_err(|_| Error::backend(None, "utility channel poisoned"))?;
        let (channel, next_id) = &mut *guard;
        let id = *next_id;
        *next_id += 1;
        channel.send(&json!({
            "id": id,
            "a": self.vocab.decode(reference),
            "b": self.vocab.decode(hypothesis),
        }))?;
        let resp = channel.recv(Some(id))?;
        if resp.get("id").and_then(Value::as_u64) != Some(id) {
            return Err(Error::protocol(format!("utility response {resp} does not answer request {id}")));
        }
        if let Some(msg) = resp.get("error") {
            return Err(Error::backend(Some(id), format!("utility server error: {msg}")));
        }
        match resp.get("u").and_then(Value::as_f64) {
            Some(u) if (0.0..=1.0).contains(&u) => Ok(u),
            _ => Err(Error::protocol(format!("utility response {resp} lacks u in [0, 1]"))),
        }
    }
}

impl std::fmt::Debug for ExternalUtility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalUtility").finish_non_exhaustive()
    }
}

#[derive(Debug)]
pub enum UtilityMetric {
    NgramF { max_n: usize },
    ExactMatch,
    External(ExternalUtility),
}

impl UtilityMetric {
    pub fn score(&self, reference: &[TokenId], hypothesis: &[TokenId]) -> Result<f64> {
        match self {
            UtilityMetric::NgramF { max_n } => Ok(ngram_f_utility(reference, hypothesis, *max_n)),
            UtilityMetric::ExactMatch => Ok(exact_match_utility(reference, hypothesis)),
            UtilityMetric::External(ext) => ext.score(reference, hypothesis),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, UtilityMetric::External(_))
    }
}

pub const DEFAULT_MAX_N: usize = 4;

/// Serializable utility settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UtilitySpec {
    NgramF {
        #[serde(default = "default_max_n")]
        max_n: usize,
    },
    ExactMatch,
    External {
        #[serde(flatten)]
        transport: Transport,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_max_n() -> usize {
    DEFAULT_MAX_N
}

fn default_timeout_ms() -> u64 {
    DEFAULT_TIMEOUT_MS
}

impl Default for UtilitySpec {
    fn default() -> Self {
        UtilitySpec::NgramF { max_n: DEFAULT_MAX_N }
    }
}

impl UtilitySpec {
    pub fn build(&self, vocab: &Vocab) -> Result<UtilityMetric> {
        Ok(match self {
            UtilitySpec::NgramF { max_n } => {
                if *max_n < 1 {
                    return Err(Error::config("utility.max_n", "must be >= 1"));
                }
                UtilityMetric::NgramF { max_n: *max_n }
            }
            UtilitySpec::ExactMatch => UtilityMetric::ExactMatch,
            UtilitySpec::External { transport, timeout_ms } => UtilityMetric::External(
                ExternalUtility::connect(transport, Duration::from_millis(*timeout_ms), vocab.clone())?,
            ),
        })
    }
}

/// Row `n`, column `h` holds `u(samples[n], samples[h])`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl UtilityMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, reference: usize, hypothesis: usize) -> f64 {
        self.values[reference * self.n + hypothesis]
    }

    pub fn row(&self, reference: usize) -> &[f64] {
        &self.values[reference * self.n..(reference + 1) * self.n]
    }
}

pub fn utility_matrix<S: AsRef<[TokenId]> + Sync>(samples: &[S], metric: &UtilityMetric) -> Result<UtilityMatrix> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::input("utility matrix needs at least one sample"));
    }
    let symmetric = metric.is_symmetric();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|r| (0..n).map(move |h| (r, h)))
        .filter(|&(r, h)| !symmetric || r <= h)
        .collect();
    let scored: Vec<f64> = pairs
        .par_iter()
        .map(|&(r, h)| {
            metric
                .score(samples[r].as_ref(), samples[h].as_ref())
                .map_err(|e| name_pair(e, r, h))
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; n * n];
    for (&(r, h), u) in pairs.iter().zip(scored) {
        values[r * n + h] = u;
        if symmetric {
            values[h * n + r] = u;
        }
    }
    Ok(UtilityMatrix { n, values })
}

fn name_pair(err: Error, r: usize, h: usize) -> Error {
    match err {
        Error::Backend { request_id, message } => Error::Backend {
            request_id,
            message: format!("pair ({r}, {h}): {message}"),
        },
        Error::Protocol(message) => Error::Protocol(format!("pair ({r}, {h}): {message}")),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbrResult {
    pub winner: usize,
    pub expected_utilities: Vec<f64>,
}

/// Candidate with the highest expected utility; ties go to the lowest index.
pub fn mbr_select<S: AsRef<[TokenId]> + Sync>(samples: &[S], metric: &UtilityMetric) -> Result<MbrResult> {
    let matrix = utility_matrix(samples, metric)?;
    Ok(select_from_matrix(&matrix))
}

pub fn select_from_matrix(matrix: &UtilityMatrix) -> MbrResult {
    let n = matrix.size();
    let expected: Vec<f64> = (0..n)
        .map(|h| (0..n).map(|r| matrix.get(r, h)).sum::<f64>() / n as f64)
        .collect();
    let mut winner = 0;
    for (h, &u) in expected.iter().enumerate() {
        if u > expected[winner] {
            winner = h;
        }
    }
    MbrResult {
        winner,
        expected_utilities: expected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const X: TokenId = 0;
    const Y: TokenId = 1;
    const Z: TokenId = 2;

    #[test]
    fn ngram_f_examples() {
        assert_eq!(ngram_f_utility(&[X, Y, Z], &[X, Y, Z], 4), 1.0);
        assert_eq!(ngram_f_utility(&[X, Y], &[Y, X], 2), 0.5);
        assert_eq!(ngram_f_utility(&[X, Y], &[Z, Z], 4), 0.0);
        assert_eq!(ngram_f_utility(&[X], &[], 4), 0.0);
        assert_eq!(ngram_f_utility::<TokenId>(&[], &[], 4), 1.0);
    }

    #[test]
    fn ngram_f_clips_repeats() {
        // unigrams: a = {x:3}, b = {x:1, y:1}; overlap 1, P = 1/2, R = 1/3,
        // F = 0.4. bigrams: {xx:2} vs {xy:1}, F = 0. only n = 1, 2 eligible.
        let u = ngram_f_utility(&[X, X, X], &[X, Y], 4);
        assert_abs_diff_eq!(u, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn matrices() {
        let m = UtilityMetric::NgramF { max_n: 2 };
        let same = vec![vec![X, Y]; 4];
        let u = utility_matrix(&same, &m).unwrap();
        assert!((0..4).all(|r| u.row(r).iter().all(|&v| v == 1.0)));
        let one = utility_matrix(&[vec![X]], &m).unwrap();
        assert_eq!(one.get(0, 0), 1.0);

        let u = utility_matrix(&[vec![X, Y], vec![Y, X], vec![Z]], &m).unwrap();
        assert_eq!(u.get(0, 1), 0.5);
        assert_eq!(u.get(0, 2), 0.0);
        assert_eq!(u.get(1, 0), 0.5);
        assert!(utility_matrix::<Vec<TokenId>>(&[], &m).is_err());
    }

    #[test]
    fn selection() {
        let em = UtilityMetric::ExactMatch;
        let r = mbr_select(&vec![vec![X, Y]; 3], &em).unwrap();
        assert_eq!(r.winner, 0);

        let r = mbr_select(&[vec![X], vec![X], vec![Y]], &em).unwrap();
        assert_eq!(r.winner, 0);
        assert_abs_diff_eq!(r.expected_utilities[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.expected_utilities[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.expected_utilities[2], 1.0 / 3.0, epsilon = 1e-15);

        let r = mbr_select(&[vec![Z]], &UtilityMetric::NgramF { max_n: 4 }).unwrap();
        assert_eq!(r, MbrResult { winner: 0, expected_utilities: vec![1.0] });
    }

    #[test]
    fn spec_json() {
        let s: UtilitySpec = serde_json::from_str(r#"{"kind":"ngram-f"}"#).unwrap();
        assert_eq!(s, UtilitySpec::NgramF { max_n: 4 });
        let s: UtilitySpec =
            serde_json::from_str(r#"{"kind":"external","transport":"tcp","address":"localhost:1"}"#).unwrap();
        assert!(matches!(s, UtilitySpec::External { .. }));
    }

    fn arb_seq() -> impl Strategy<Value = Vec<TokenId>> {
        prop::collection::vec(0usize..4, 0..7)
    }

    proptest! {
        #[test]
        fn ngram_f_bounded_and_symmetric(a in arb_seq(), b in arb_seq(), max_n in 1usize..5) {
            let u = ngram_f_utility(&a, &b, max_n);
            prop_assert!((0.0..=1.0).contains(&u));
            prop_assert_eq!(u, ngram_f_utility(&b, &a, max_n));
        }

        #[test]
        fn mbr_permutation_and_bounds(samples in prop::collection::vec(arb_seq(), 1..8), rot in 0usize..8) {
            let m = UtilityMetric::NgramF { max_n: 2 };
            let r = mbr_select(&samples, &m).unwrap();
            prop_assert!(r.expected_utilities.iter().all(|u| (0.0..=1.0 + 1e-12).contains(u)));
            let best = r.expected_utilities[r.winner];
            prop_assert!(r.expected_utilities.iter().all(|&u| u <= best));

            let k = rot % samples.len();
            let mut rotated = samples.clone();
            rotated.rotate_left(k);
            let r2 = mbr_select(&rotated, &m).unwrap();
            for i in 0..samples.len() {
                let j = (i + samples.len() - k) % samples.len();
                prop_assert!((r2.expected_utilities[j] - r.expected_utilities[i]).abs() < 1e-12);
            }
        }
    }
}

//! Self-consistency: extract an answer from each sampled reasoning path and
//! return the most frequent one.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::Vocab;
use crate::sampler::DecodedSample;

#[derive(Debug, Clone)]
pub enum AnswerExtractor {
    /// Final non-eos token.
    LastToken,
    /// Capture group of the last match over the detokenized text.
    RegexCapture(Regex),
    /// The whole detokenized text.
    FullSequence,
}

impl AnswerExtractor {
    /// Compiles `pattern`, which must have exactly one capture group.
    pub fn regex(pattern: &str) -> Result<Self> {
        let re = Regex::new(pattern)
            .map_err(|e| Error::config("extractor.pattern", e.to_string()))?;
        if re.captures_len() != 2 {
            return Err(Error::config(
                "extractor.pattern",
                format!("pattern needs exactly one capture group, has {}", re.captures_len() - 1),
            ));
        }
        Ok(AnswerExtractor::RegexCapture(re))
    }

    /// `None` means the sample abstains.
    pub fn extract(&self, sample: &DecodedSample, vocab: &Vocab) -> Option<String> {
        match self {
            AnswerExtractor::LastToken => sample
                .tokens
                .iter()
                .rev()
                .find(|&&t| t != vocab.eos())
                .and_then(|&t| vocab.token(t))
                .map(str::to_string),
            AnswerExtractor::RegexCapture(re) => {
                let text = vocab.detokenize(&sample.tokens);
                re.captures_iter(&text)
                    .last()
                    .and_then(|c| c.get(1))
                    .map(|m| m.as_str().to_string())
            }
            AnswerExtractor::FullSequence => Some(vocab.detokenize(&sample.tokens)),
        }
    }
}

pub fn extract_answer(sample: &DecodedSample, extractor: &AnswerExtractor, vocab: &Vocab) -> Option<String> {
    extractor.extract(sample, vocab)
}

/// Serializable extractor settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExtractorSpec {
    LastToken,
    RegexCapture { pattern: String },
    FullSequence,
}

impl ExtractorSpec {
    pub fn build(&self) -> Result<AnswerExtractor> {
        Ok(match self {
            ExtractorSpec::LastToken => AnswerExtractor::LastToken,
            ExtractorSpec::RegexCapture { pattern } => AnswerExtractor::regex(pattern)?,
            ExtractorSpec::FullSequence => AnswerExtractor::FullSequence,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteResult {
    pub winner: String,
    pub counts: BTreeMap<String, usize>,
    pub tie_broken: bool,
}

/// Majority vote over non-abstaining samples. Ties go to the answer with the
/// highest summed sample logprob, then to the lexicographically smallest.
pub fn majority_vote(samples: &[DecodedSample], extractor: &AnswerExtractor, vocab: &Vocab) -> Result<VoteResult> {
    if samples.is_empty() {
        return Err(Error::input("majority vote needs at least one sample"));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut mass: BTreeMap<String, f64> = BTreeMap::new();
    for s in samples {
        if let Some(answer) = extractor.extract(s, vocab) {
            *counts.entry(answer.clone()).or_default() += 1;
            *mass.entry(answer).or_default() += s.logprob;
        }
    }
    let top = counts.values().copied().max().ok_or(Error::EmptyVote(samples.len()))?;
    let tied: Vec<&String> = counts.iter().filter(|(_, &c)| c == top).map(|(a, _)| a).collect();
    // BTreeMap iteration is lexicographic, so the first maximum by logprob
    // is also the smallest string among equal-logprob answers.
    let mut winner = tied[0];
    for &a in &tied[1..] {
        if mass[a] > mass[winner] {
            winner = a;
        }
    }
    Ok(VoteResult {
        winner: winner.clone(),
        tie_broken: tied.len() > 1,
        counts,
    })
}

/// Fraction of `(vote, gold)` pairs whose winner equals gold after trimming
/// whitespace. `None` votes (every sample abstained) count as wrong.
pub fn accuracy<'a, I>(results: I) -> Result<f64>
where
    I: IntoIterator<Item = (Option<&'a VoteResult>, &'a str)>,
{
    let mut total = 0usize;
    let mut correct = 0usize;
    for (vote, gold) in results {
        total += 1;
        if vote.is_some_and(|v| is_correct(v, gold)) {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(Error::input("accuracy over zero instances"));
    }
    Ok(correct as f64 / total as f64)
}

pub fn is_correct(vote: &VoteResult, gold: &str) -> bool {
    vote.winner.trim() == gold.trim()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Origin;
    use proptest::prelude::*;

    fn vocab() -> Vocab {
        let toks = ["a", "b", "the", "answer", "is", "42", "7", "5", "3", "</s>"];
        Vocab::new(toks.iter().map(|s| s.to_string()).collect(), 9).unwrap()
    }

    fn sample(vocab: &Vocab, words: &[&str], logprob: f64) -> DecodedSample {
        DecodedSample {
            tokens: vocab.encode(words).unwrap(),
            logprob,
            origin: Origin::Seed(0),
            vocab_perm_seed: None,
        }
    }

    #[test]
    fn extraction() {
        let v = vocab();
        let s = sample(&v, &["a", "b", "7", "</s>"], -1.0);
        assert_eq!(extract_answer(&s, &AnswerExtractor::LastToken, &v).as_deref(), Some("7"));
        let s = sample(&v, &["the", "answer", "is", "42", "</s>"], -1.0);
        let re = AnswerExtractor::regex(r"answer is (\d+)").unwrap();
        assert_eq!(extract_answer(&s, &re, &v).as_deref(), Some("42"));
        let s = sample(&v, &["a", "b"], -1.0);
        assert_eq!(extract_answer(&s, &re, &v), None);
        assert_eq!(extract_answer(&s, &AnswerExtractor::FullSequence, &v).as_deref(), Some("a b"));
        let s = sample(&v, &["</s>"], 0.0);
        assert_eq!(extract_answer(&s, &AnswerExtractor::LastToken, &v), None);
    }

    #[test]
    fn regex_takes_last_match() {
        let v = vocab();
        let s = sample(&v, &["answer", "is", "5", "answer", "is", "3"], -1.0);
        let re = AnswerExtractor::regex(r"answer is (\d+)").unwrap();
        assert_eq!(re.extract(&s, &v).as_deref(), Some("3"));
    }

    #[test]
    fn regex_validation() {
        assert!(matches!(AnswerExtractor::regex("(unclosed"), Err(Error::Config { .. })));
        assert!(AnswerExtractor::regex(r"\d+").is_err());
        assert!(AnswerExtractor::regex(r"(\d)(\d)").is_err());
        assert!(AnswerExtractor::regex(r"(?:x)(\d)").is_ok());
    }

    #[test]
    fn votes() {
        let v = vocab();
        let ex = AnswerExtractor::LastToken;
        let r = majority_vote(
            &[sample(&v, &["5"], -1.0), sample(&v, &["5"], -1.0), sample(&v, &["3"], -1.0)],
            &ex,
            &v,
        )
        .unwrap();
        assert_eq!(r.winner, "5");
        assert_eq!(r.counts, BTreeMap::from([("5".into(), 2), ("3".into(), 1)]));
        assert!(!r.tie_broken);

        let r = majority_vote(&[sample(&v, &["3"], -2.5), sample(&v, &["5"], -1.0)], &ex, &v).unwrap();
        assert_eq!(r.winner, "5");
        assert!(r.tie_broken);

        // equal logprob falls through to lexicographic order
        let r = majority_vote(&[sample(&v, &["5"], -1.0), sample(&v, &["3"], -1.0)], &ex, &v).unwrap();
        assert_eq!(r.winner, "3");

        let r = majority_vote(&[sample(&v, &["7"], -3.0)], &ex, &v).unwrap();
        assert_eq!(r.winner, "7");
    }

    #[test]
    fn abstentions() {
        let v = vocab();
        let re = AnswerExtractor::regex(r"is (\d+)").unwrap();
        let r = majority_vote(&[sample(&v, &["a"], -1.0), sample(&v, &["is", "5"], -1.0)], &re, &v).unwrap();
        assert_eq!(r.counts.values().sum::<usize>(), 1);
        let err = majority_vote(&[sample(&v, &["a"], -1.0)], &re, &v).unwrap_err();
        assert!(matches!(err, Error::EmptyVote(1)));
    }

    #[test]
    fn accuracy_rules() {
        let vote = |w: &str| VoteResult { winner: w.into(), counts: BTreeMap::new(), tie_broken: false };
        let (a, b, c, d) = (vote("1"), vote("2"), vote("3"), vote("5 "));
        assert_eq!(accuracy([(Some(&a), "1"), (Some(&b), "2")]).unwrap(), 1.0);
        assert_eq!(
            accuracy([(Some(&a), "1"), (Some(&b), "2"), (Some(&c), "3"), (Some(&a), "9")]).unwrap(),
            0.75
        );
        assert_eq!(accuracy([(Some(&d), "5")]).unwrap(), 1.0);
        assert_eq!(accuracy([(None, "5"), (Some(&d), "5")]).unwrap(), 0.5);
        assert!(accuracy(std::iter::empty()).is_err());
    }

    proptest! {
        #[test]
        fn vote_properties(answers in prop::collection::vec(0usize..4, 1..30), rot in 0usize..30) {
            let v = vocab();
            let words = ["42", "7", "5", "3"];
            let samples: Vec<_> = answers.iter().map(|&a| sample(&v, &[words[a]], -1.0)).collect();
            let r = majority_vote(&samples, &AnswerExtractor::LastToken, &v).unwrap();
            let top = r.counts[&r.winner];
            prop_assert!(r.counts.values().all(|&c| c <= top));
            prop_assert_eq!(r.counts.values().sum::<usize>(), samples.len());
            let mut rotated = samples.clone();
            rotated.rotate_left(rot % samples.len());
            let r2 = majority_vote(&rotated, &AnswerExtractor::LastToken, &v).unwrap();
            if !r.tie_broken {
                prop_assert_eq!(&r.winner, &r2.winner);
            }
            if r.counts.len() == 1 {
                prop_assert!(!r.tie_broken);
            }
        }
    }
}

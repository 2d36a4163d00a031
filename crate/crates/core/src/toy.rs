//! Small synthetic tasks with exactly known answer distributions, used by
//! the examples, the tests and the `eval` walkthrough in the README.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lm::{ExplicitTableModel, LanguageModel, TokenDistribution, TokenId, Vocab, DEFAULT_EOS};

/// Stationary model over the given token names; the last name is eos.
pub fn stationary(names: &[&str], probs: Vec<f64>) -> Result<ExplicitTableModel> {
    let vocab = Vocab::new(names.iter().map(|s| s.to_string()).collect(), names.len() - 1)?;
    ExplicitTableModel::stationary(vocab, probs)
}

/// A multiple-choice "reasoning" task.
///
/// A prompt is one question token `q<k>`. The model then emits
/// `steps` reasoning tokens drawn from `step_probs`, one answer token and
/// eos. The answer is independent of the reasoning path and follows
/// `answer_probs` rotated by `k`, so question `k`'s most likely answer is
/// `answers[k % answers.len()]`, which is also its gold answer.
#[derive(Debug, Clone)]
pub struct ReasoningTask {
    vocab: Vocab,
    questions: usize,
    steps: usize,
    step_probs: Vec<f64>,
    answer_probs: Vec<f64>,
    answer_ids: Vec<TokenId>,
    step_ids: Vec<TokenId>,
}

impl ReasoningTask {
    pub fn new(
        questions: usize,
        answers: &[&str],
        answer_probs: Vec<f64>,
        step_probs: Vec<f64>,
        steps: usize,
    ) -> Result<Self> {
        if answers.len() != answer_probs.len() || answers.is_empty() || step_probs.is_empty() {
            return Err(Error::input("answers and answer_probs must be non-empty and equal length"));
        }
        TokenDistribution::new(answer_probs.clone())?;
        TokenDistribution::new(step_probs.clone())?;
        let mut tokens: Vec<String> = (0..questions).map(|k| format!("q{k}")).collect();
        let step_ids: Vec<TokenId> = (0..step_probs.len()).map(|j| tokens.len() + j).collect();
        tokens.extend((0..step_probs.len()).map(|j| format!("s{j}")));
        let answer_ids: Vec<TokenId> = (0..answers.len()).map(|j| tokens.len() + j).collect();
        tokens.extend(answers.iter().map(|a| a.to_string()));
        tokens.push(DEFAULT_EOS.to_string());
        let eos = tokens.len() - 1;
        Ok(Self {
            vocab: Vocab::new(tokens, eos)?,
            questions,
            steps,
            step_probs,
            answer_probs,
            answer_ids,
            step_ids,
        })
    }

    /// Three answers with marginals 0.4 / 0.35 / 0.25 after one reasoning
    /// step over three step tokens.
    pub fn three_answer(questions: usize) -> Self {
        Self::new(questions, &["3", "5", "8"], vec![0.4, 0.35, 0.25], vec![0.5, 0.3, 0.2], 1)
            .expect("valid constants")
    }

    /// Generated length including the answer and eos.
    pub fn max_len(&self) -> usize {
        self.steps + 2
    }

    pub fn questions(&self) -> usize {
        self.questions
    }

    pub fn prompt(&self, question: usize) -> Vec<TokenId> {
        vec![question]
    }

    pub fn gold(&self, question: usize) -> &str {
        let a = self.answer_ids[question % self.answer_ids.len()];
        self.vocab.token(a).expect("answer id in vocab")
    }

    /// Answer distribution for question `k`.
    pub fn answer_distribution(&self, question: usize) -> Vec<f64> {
        let m = self.answer_probs.len();
        (0..m)
            .map(|j| self.answer_probs[(j + m - question % m) % m])
            .collect()
    }

    fn row(&self, prefix: &[TokenId]) -> Result<Vec<f64>> {
        let v = self.vocab.len();
        let question = match prefix.first() {
            Some(&q) if q < self.questions => q,
            _ => return Err(Error::input("prefix must start with a question token")),
        };
        let generated = prefix.len() - 1;
        let mut probs = vec![0.0; v];
        if generated < self.steps {
            for (&id, &p) in self.step_ids.iter().zip(&self.step_probs) {
                probs[id] = p;
            }
        } else if generated == self.steps {
            for (&id, p) in self.answer_ids.iter().zip(self.answer_distribution(question)) {
                probs[id] = p;
            }
        } else {
            probs[self.vocab.eos()] = 1.0;
        }
        Ok(probs)
    }

    /// The same model as an explicit table, e.g. for writing a model file.
    pub fn to_table_model(&self) -> Result<ExplicitTableModel> {
        let mut rows = HashMap::new();
        let mut frontier: Vec<Vec<TokenId>> = (0..self.questions).map(|q| vec![q]).collect();
        for _ in 0..=self.steps + 1 {
            let mut next = Vec::new();
            for prefix in frontier {
                let probs = self.row(&prefix)?;
                for (tok, &p) in probs.iter().enumerate() {
                    if p > 0.0 && tok != self.vocab.eos() {
                        let mut longer = prefix.clone();
                        longer.push(tok);
                        next.push(longer);
                    }
                }
                rows.insert(prefix, TokenDistribution::new(probs)?);
            }
            frontier = next;
        }
        ExplicitTableModel::new(self.vocab.clone(), rows)
    }
}

impl LanguageModel for ReasoningTask {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_distribution(&self, prefix: &[TokenId]) -> Result<TokenDistribution> {
        crate::lm::check_prefix(&self.vocab, prefix)?;
        Ok(TokenDistribution::new_unchecked(self.row(prefix)?))
    }
}

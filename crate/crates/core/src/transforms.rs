//! Next-token distribution transforms: temperature, top-k, top-p (nucleus)
//! and epsilon truncation.
//!
//! All ties break toward the lower token index, so every transform is a
//! deterministic function of its input. Identity parameters return the input
//! unchanged.

use std::cmp::Ordering;

use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lm::TokenDistribution;

/// Slack used when comparing cumulative mass against a nucleus threshold.
const CUMULATIVE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Temperature,
    TopK,
    TopP,
    Epsilon,
}

/// Conventional application order.
pub const DEFAULT_ORDER: [TransformKind; 4] = [
    TransformKind::Temperature,
    TransformKind::TopK,
    TransformKind::TopP,
    TransformKind::Epsilon,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Temperature(f64),
    TopK(usize),
    TopP(f64),
    Epsilon(f64),
}

impl Transform {
    pub fn kind(&self) -> TransformKind {
        match self {
            Transform::Temperature(_) => TransformKind::Temperature,
            Transform::TopK(_) => TransformKind::TopK,
            Transform::TopP(_) => TransformKind::TopP,
            Transform::Epsilon(_) => TransformKind::Epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Transform::Temperature(t) => t > 0.0 && t.is_finite(),
            Transform::TopK(k) => k >= 1,
            Transform::TopP(p) => p > 0.0 && p <= 1.0,
            Transform::Epsilon(e) => (0.0..1.0).contains(&e),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("invalid transform parameter: {self:?}")))
        }
    }

    pub fn apply(&self, dist: &TokenDistribution) -> Result<TokenDistribution> {
        match *self {
            Transform::Temperature(t) => apply_temperature(dist, t),
            Transform::TopK(k) => apply_top_k(dist, k),
            Transform::TopP(p) => apply_top_p(dist, p),
            Transform::Epsilon(e) => apply_epsilon(dist, e),
        }
    }
}

/// Scales log-probabilities by `1 / temperature` and renormalizes.
pub fn apply_temperature(dist: &TokenDistribution, temperature: f64) -> Result<TokenDistribution> {
    Transform::Temperature(temperature).validate()?;
    if temperature == 1.0 {
        return Ok(dist.clone());
    }
    let probs = dist.probs();
    let max_log = probs[dist.argmax()].ln();
    let weights = probs
        .iter()
        .map(|&p| {
            if p > 0.0 {
                ((p.ln() - max_log) / temperature).exp()
            } else {
                0.0
            }
        })
        .collect();
    TokenDistribution::from_weights(weights)
}

pub fn apply_top_k(dist: &TokenDistribution, k: usize) -> Result<TokenDistribution> {
    Transform::TopK(k).validate()?;
    if k >= dist.len() {
        return Ok(dist.clone());
    }
    let order = descending_order(dist.probs());
    keep_only(dist, &order[..k])
}

/// Keeps the shortest descending-probability prefix whose mass reaches `p`.
pub fn apply_top_p(dist: &TokenDistribution, p: f64) -> Result<TokenDistribution> {
    Transform::TopP(p).validate()?;
    if p == 1.0 {
        return Ok(dist.clone());
    }
    let probs = dist.probs();
    let order = descending_order(probs);
    let mut cumulative = 0.0;
    let mut keep = order.len();
    for (rank, &tok) in order.iter().enumerate() {
        cumulative += probs[tok];
        if cumulative >= p - CUMULATIVE_SLACK {
            keep = rank + 1;
            break;
        }
    }
    keep_only(dist, &order[..keep])
}

/// Drops tokens below `eps`. If nothing survives, keeps only the argmax.
pub fn apply_epsilon(dist: &TokenDistribution, eps: f64) -> Result<TokenDistribution> {
    Transform::Epsilon(eps).validate()?;
    if eps == 0.0 {
        return Ok(dist.clone());
    }
    let kept: Vec<usize> = (0..dist.len()).filter(|&i| dist.probs()[i] >= eps).collect();
    if kept.is_empty() {
        keep_only(dist, &[dist.argmax()])
    } else {
        keep_only(dist, &kept)
    }
}

fn descending_order(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        probs[b]
            .partial_cmp(&probs[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

fn keep_only(dist: &TokenDistribution, keep: &[usize]) -> Result<TokenDistribution> {
    if keep.len() == dist.len() {
        return Ok(dist.clone());
    }
    let mut weights = vec![0.0; dist.len()];
    for &i in keep {
        weights[i] = dist.probs()[i];
    }
    TokenDistribution::from_weights(weights)
}

/// An ordered list of transforms applied left to right.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransformChain {
    steps: Vec<Transform>,
}

impl TransformChain {
    pub fn new(steps: Vec<Transform>) -> Result<Self> {
        for step in &steps {
            step.validate()?;
        }
        Ok(Self { steps })
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> &[Transform] {
        &self.steps
    }

    pub fn is_identity(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn apply(&self, dist: &TokenDistribution) -> Result<TokenDistribution> {
        apply_chain(dist, self)
    }
}

pub fn apply_chain(dist: &TokenDistribution, chain: &TransformChain) -> Result<TokenDistribution> {
    let mut current = dist.clone();
    for step in &chain.steps {
        current = step.apply(&current)?;
    }
    Ok(current)
}

/// JSON form: `{"temperature":1.0,"top_k":40,"top_p":0.95,"epsilon":0.0}`
/// with an optional `"order"` list. Absent keys are skipped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    top_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    top_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<Vec<TransformKind>>,
}

impl TryFrom<ChainConfig> for TransformChain {
    type Error = Error;

    fn try_from(cfg: ChainConfig) -> Result<Self> {
        let order = cfg.order.clone().unwrap_or_else(|| DEFAULT_ORDER.to_vec());
        let mut seen = Vec::new();
        let mut steps = Vec::new();
        for kind in order {
            if seen.contains(&kind) {
                return Err(Error::config("transforms.order", format!("{kind:?} listed twice")));
            }
            seen.push(kind);
            let step = match kind {
                TransformKind::Temperature => cfg.temperature.map(Transform::Temperature),
                TransformKind::TopK => cfg.top_k.map(Transform::TopK),
                TransformKind::TopP => cfg.top_p.map(Transform::TopP),
                TransformKind::Epsilon => cfg.epsilon.map(Transform::Epsilon),
            };
            if let Some(step) = step {
                steps.push(step);
            }
        }
        let present = [
            (TransformKind::Temperature, cfg.temperature.is_some()),
            (TransformKind::TopK, cfg.top_k.is_some()),
            (TransformKind::TopP, cfg.top_p.is_some()),
            (TransformKind::Epsilon, cfg.epsilon.is_some()),
        ];
        for (kind, is_set) in present {
            if is_set && !seen.contains(&kind) {
                return Err(Error::config(
                    "transforms.order",
                    format!("{kind:?} is set but missing from order"),
                ));
            }
        }
        TransformChain::new(steps)
    }
}

impl Serialize for TransformChain {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut cfg = ChainConfig::default();
        let mut order = Vec::new();
        for step in &self.steps {
            if order.contains(&step.kind()) {
                return Err(S::Error::custom("chain repeats a transform kind"));
            }
            order.push(step.kind());
            match *step {
                Transform::Temperature(t) => cfg.temperature = Some(t),
                Transform::TopK(k) => cfg.top_k = Some(k),
                Transform::TopP(p) => cfg.top_p = Some(p),
                Transform::Epsilon(e) => cfg.epsilon = Some(e),
            }
        }
        let canonical: Vec<_> = DEFAULT_ORDER
            .iter()
            .copied()
            .filter(|k| order.contains(k))
            .collect();
        if order != canonical {
            cfg.order = Some(order);
        }
        cfg.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TransformChain {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let cfg = ChainConfig::deserialize(deserializer)?;
        TransformChain::try_from(cfg).map_err(serde::de::Error::custom)
    }
}

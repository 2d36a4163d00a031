//! Evaluation statistics: pooled n-gram diversity, mean ± std reporting and
//! the two-sided paired Student t-test.

use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DIVERSITY_MAX_N: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityScore {
    pub d: f64,
    pub per_n: [f64; DIVERSITY_MAX_N],
}

/// `d_n` = distinct n-grams / total n-grams, both pooled over all samples;
/// `d = d_1 + ... + d_4`. Orders with no n-grams contribute 0.
pub fn ngram_diversity<T, S>(samples: &[S]) -> Result<DiversityScore>
where
    T: Eq + Hash,
    S: AsRef<[T]>,
{
    if samples.is_empty() {
        return Err(Error::input("diversity needs at least one sample"));
    }
    let mut per_n = [0.0; DIVERSITY_MAX_N];
    for (slot, n) in per_n.iter_mut().zip(1..) {
        let mut unique: HashSet<&[T]> = HashSet::new();
        let mut total = 0usize;
        for s in samples {
            for gram in s.as_ref().windows(n) {
                unique.insert(gram);
                total += 1;
            }
        }
        if total > 0 {
            *slot = unique.len() as f64 / total as f64;
        }
    }
    Ok(DiversityScore {
        d: per_n.iter().sum(),
        per_n,
    })
}

/// Arithmetic mean and population standard deviation. A constant input
/// returns exactly `(value, 0.0)`.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    let first = *values
        .first()
        .ok_or_else(|| Error::input("mean of an empty list"))?;
    if values.iter().all(|v| v.to_bits() == first.to_bits()) {
        return Ok((first, 0.0));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    pub t: f64,
    pub dof: usize,
    /// Two-sided.
    pub p: f64,
    pub mean_diff: f64,
    /// Differences have zero variance but nonzero mean, so `t` is infinite.
    pub degenerate: bool,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTestResult> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "paired t-test needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::input("paired t-test needs at least 2 pairs"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len() as f64;
    let dof = diffs.len() - 1;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();

    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            PairedTestResult { t: 0.0, dof, p: 1.0, mean_diff: 0.0, degenerate: false }
        } else {
            PairedTestResult {
                t: mean.signum() * f64::INFINITY,
                dof,
                p: 0.0,
                mean_diff: mean,
                degenerate: true,
            }
        });
    }
    let t = mean / (sd / n.sqrt());
    Ok(PairedTestResult {
        t,
        dof,
        p: student_t_two_sided_p(t, dof as f64),
        mean_diff: mean,
        degenerate: false,
    })
}

/// `P(|T| >= |t|)` for Student's t with `dof` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(dof / (dof + t * t), dof / 2.0, 0.5).clamp(0.0, 1.0)
}

pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    let tail = 0.5 * student_t_two_sided_p(t, dof);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// `I_x(a, b)` via the continued fraction of the incomplete beta function,
/// evaluated with the modified Lentz method.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // the fraction converges fastest for x below the mean a / (a + b)
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

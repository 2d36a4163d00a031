//! Estimating performance at every divisor `d` of a pool size `N` from one
//! `N`-sample run per instance.
//!
//! Arithmetic pools are stored in lattice order, so taking every `N/d`-th
//! element from a random start yields a coarser shifted lattice. Ancestral
//! subsamples draw `d` elements uniformly with replacement. At `d = N` both
//! strategies use the whole pool unchanged, so that row has zero spread.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::mean_std;
use crate::sampler::Strategy;
use crate::seeds;

pub const DEFAULT_RUNS: usize = 20;

/// All positive divisors of `n`, ascending.
pub fn divisors(n: usize) -> Vec<usize> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut i = 1;
    while i * i <= n {
        if n % i == 0 {
            small.push(i);
            if i != n / i {
                large.push(n / i);
            }
        }
        i += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsamplePlan {
    pub pool_size: usize,
    pub divisors: Vec<usize>,
    pub runs: usize,
    pub strategy: Strategy,
    pub seed: u64,
}

impl SubsamplePlan {
    /// Plan over every divisor of `pool_size`.
    pub fn new(pool_size: usize, runs: usize, strategy: Strategy, seed: u64) -> Result<Self> {
        Self::with_divisors(pool_size, divisors(pool_size), runs, strategy, seed)
    }

    pub fn with_divisors(
        pool_size: usize,
        mut ds: Vec<usize>,
        runs: usize,
        strategy: Strategy,
        seed: u64,
    ) -> Result<Self> {
        if pool_size < 1 || runs < 1 {
            return Err(Error::input("subsample plan needs pool_size >= 1 and runs >= 1"));
        }
        if let Some(bad) = ds.iter().find(|&&d| d == 0 || pool_size % d != 0) {
            return Err(Error::input(format!("{bad} does not divide {pool_size}")));
        }
        ds.sort_unstable();
        ds.dedup();
        Ok(Self {
            pool_size,
            divisors: ds,
            runs,
            strategy,
            seed,
        })
    }
}

/// Indices of a size-`d` subsample of an `n`-element pool.
pub fn subsample_indices(n: usize, d: usize, strategy: Strategy, rng_seed: u64) -> Result<Vec<usize>> {
    if d == 0 || n % d != 0 {
        return Err(Error::input(format!("subsample size {d} does not divide pool size {n}")));
    }
    if d == n {
        return Ok((0..n).collect());
    }
    let mut rng = seeds::rng(rng_seed);
    Ok(match strategy {
        Strategy::Arithmetic => {
            let stride = n / d;
            let offset = rng.gen_range(0..stride);
            (0..d).map(|k| offset + k * stride).collect()
        }
        Strategy::Ancestral => (0..d).map(|_| rng.gen_range(0..n)).collect(),
    })
}

pub fn draw_subsample<T: Clone>(pool: &[T], d: usize, strategy: Strategy, rng_seed: u64) -> Result<Vec<T>> {
    Ok(subsample_indices(pool.len(), d, strategy, rng_seed)?
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub d: usize,
    pub strategy: Strategy,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

/// One run at one `d`: the indices drawn per instance and the
/// instance-averaged metric.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub indices: Vec<Vec<usize>>,
    pub value: f64,
}

/// Metric averaged over instances on their full pools.
pub fn full_pool_metric<T, P, F>(pools: &[P], metric_fn: F) -> Result<f64>
where
    P: AsRef<[T]>,
    F: Fn(usize, &[T]) -> Result<f64>,
{
    if pools.is_empty() {
        return Err(Error::input("no instances"));
    }
    let values = pools
        .iter()
        .enumerate()
        .map(|(i, pool)| metric_fn(i, pool.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_std(&values)?.0)
}

fn instance_seed(plan: &SubsamplePlan, d: usize, run: usize, instance: usize) -> u64 {
    seeds::derive_seed_path(plan.seed, &[d as u64, run as u64, instance as u64])
}

/// Every run at size `d`. Runs draw fresh per-instance subsamples from
/// seeds keyed by `(plan.seed, d, run, instance)`.
pub fn subsample_runs<T, P, F>(pools: &[P], plan: &SubsamplePlan, d: usize, metric_fn: F) -> Result<Vec<RunOutcome>>
where
    T: Clone + Sync,
    P: AsRef<[T]> + Sync,
    F: Fn(usize, &[T]) -> Result<f64> + Sync,
{
    check_pools(pools, plan)?;
    if d == 0 || plan.pool_size % d != 0 {
        return Err(Error::input(format!("{d} does not divide {}", plan.pool_size)));
    }
    if d == plan.pool_size {
        // identity subsample: every run is the same computation
        let value = full_pool_metric(pools, &metric_fn)?;
        let indices = vec![(0..d).collect::<Vec<_>>(); pools.len()];
        return Ok(vec![RunOutcome { indices, value }; plan.runs]);
    }
    (0..plan.runs)
        .into_par_iter()
        .map(|run| {
            let mut indices = Vec::with_capacity(pools.len());
            let mut values = Vec::with_capacity(pools.len());
            for (i, pool) in pools.iter().enumerate() {
                let pool = pool.as_ref();
                let idx = subsample_indices(pool.len(), d, plan.strategy, instance_seed(plan, d, run, i))?;
                let sub: Vec<T> = idx.iter().map(|&k| pool[k].clone()).collect();
                values.push(metric_fn(i, &sub)?);
                indices.push(idx);
            }
            Ok(RunOutcome {
                indices,
                value: mean_std(&values)?.0,
            })
        })
        .collect()
}

/// `(d, mean, std)` over `plan.runs` runs for every divisor in the plan;
/// std is the population std of the run-level values.
pub fn subsample_curve<T, P, F>(pools: &[P], plan: &SubsamplePlan, metric_fn: F) -> Result<Vec<CurveRow>>
where
    T: Clone + Sync,
    P: AsRef<[T]> + Sync,
    F: Fn(usize, &[T]) -> Result<f64> + Sync,
{
    plan.divisors
        .iter()
        .map(|&d| {
            let runs = subsample_runs(pools, plan, d, &metric_fn)?;
            let values: Vec<f64> = runs.iter().map(|r| r.value).collect();
            let (mean, std) = mean_std(&values)?;
            Ok(CurveRow {
                d,
                strategy: plan.strategy,
                mean,
                std,
                runs: plan.runs,
            })
        })
        .collect()
}

fn check_pools<T, P: AsRef<[T]>>(pools: &[P], plan: &SubsamplePlan) -> Result<()> {
    if pools.is_empty() {
        return Err(Error::input("no instances"));
    }
    if let Some((i, p)) = pools
        .iter()
        .enumerate()
        .find(|(_, p)| p.as_ref().len() != plan.pool_size)
    {
        return Err(Error::input(format!(
            "instance {i} has pool size {}, plan expects {}",
            p.as_ref().len(),
            plan.pool_size
        )));
    }
    Ok(())
}

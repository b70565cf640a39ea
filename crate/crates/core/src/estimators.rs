//! Fixed-level Monte Carlo and the randomized coupled-sum estimator
//!
//! `Z = sum_{n=0}^{N} (Y_n - Y_{n-1}) / P(N >= n)` with `Y_{-1} = 0` and a
//! random level `N` drawn independently of the paths. Each level inside one
//! `Z` sample uses its own streams, so the terms are independent across
//! levels and coupled only within a level.
//!
//! Samples are generated in parallel but stored by sample index and reduced
//! with a fixed pairwise tree, so results do not depend on the worker count.

use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

use crate::grid::MAX_LEVEL;
use crate::payoffs::DiscountedPayoff;
use crate::rates::RateModel;
use crate::rng::{RngStream, Role, SampleSeed};
use crate::scheme::{coupled_from_path, simulate_path_sums};
use crate::variance::HestonParams;
use crate::{Error, Result};

/// Law of the randomized top level, given by its tail `n -> P(N >= n)`.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelDistribution {
    /// `P(N >= n) = 2^(-exponent n)`.
    Geometric { exponent: f64 },
    /// Explicit tail values; `P(N >= n) = 0` past the end.
    Table(Vec<f64>),
}

impl Default for LevelDistribution {
    fn default() -> Self {
        LevelDistribution::Geometric { exponent: 1.5 }
    }
}

impl LevelDistribution {
    pub fn geometric(exponent: f64) -> Result<Self> {
        let d = LevelDistribution::Geometric { exponent };
        d.validate()?;
        Ok(d)
    }

    pub fn table(tail: Vec<f64>) -> Result<Self> {
        let d = LevelDistribution::Table(tail);
        d.validate()?;
        Ok(d)
    }

    /// Point mass at `m`.
    pub fn degenerate(m: u32) -> Self {
        LevelDistribution::Table(vec![1.0; m as usize + 1])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LevelDistribution::Geometric { exponent } => {
                if !(exponent.is_finite() && *exponent > 0.0) {
                    return Err(Error::param(format!("tail exponent must be > 0, got {exponent}")));
                }
            }
            LevelDistribution::Table(tail) => {
                if tail.first() != Some(&1.0) {
                    return Err(Error::param("tail table must start with P(N >= 0) = 1"));
                }
                if tail.iter().any(|t| !(0.0..=1.0).contains(t)) {
                    return Err(Error::param("tail probabilities must lie in [0, 1]"));
                }
                if tail.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::param("tail probabilities must be nonincreasing"));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn tail(&self, n: u32) -> f64 {
        match self {
            LevelDistribution::Geometric { exponent } => (-exponent * f64::from(n)).exp2(),
            LevelDistribution::Table(t) => t.get(n as usize).copied().unwrap_or(0.0),
        }
    }

    pub fn probability(&self, n: u32) -> f64 {
        self.tail(n) - self.tail(n + 1)
    }
}

/// Inversion on the tail: the largest `n` with `P(N >= n) > U`, `U ~ U(0, 1]`.
/// Levels are capped at the grid maximum.
pub fn sample_level(d: &LevelDistribution, rng: &mut RngStream) -> u32 {
    let u = rng.uniform_pos();
    let mut n = 0;
    while n < MAX_LEVEL && d.tail(n + 1) > u {
        n += 1;
    }
    n
}

/// Truncated expected-work series `sum 2^n P(N >= n)` in level-0 units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkSeries {
    pub partial_sum: f64,
    /// Bound on the omitted terms; infinite when the series diverges.
    pub remainder_bound: f64,
    pub divergent: bool,
}

pub fn expected_work(d: &LevelDistribution, n_max: u32) -> WorkSeries {
    let partial_sum = (0..=n_max).map(|n| f64::from(n).exp2() * d.tail(n)).sum();
    match d {
        LevelDistribution::Geometric { exponent } => {
            let ratio = (1.0 - exponent).exp2();
            if ratio >= 1.0 {
                WorkSeries { partial_sum, remainder_bound: f64::INFINITY, divergent: true }
            } else {
                let next = ratio.powf(f64::from(n_max) + 1.0);
                WorkSeries { partial_sum, remainder_bound: next / (1.0 - ratio), divergent: false }
            }
        }
        LevelDistribution::Table(t) => {
            let rest = (n_max as usize + 1..t.len()).map(|n| (n as f64).exp2() * t[n]).sum();
            WorkSeries { partial_sum, remainder_bound: rest, divergent: false }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Plain Monte Carlo on one level; biased by the discretization.
    Standard { level: u32 },
    CoupledSum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub n_samples: u64,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    /// Truncates the random level. Biases the coupled sum; diagnostics only.
    pub max_level: Option<u32>,
}

impl RunOptions {
    pub fn new(n_samples: u64, seed: u64) -> Self {
        Self { n_samples, seed, workers: 0, max_level: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
    /// Fine steps per sample, in units of one level-0 path.
    pub avg_work_units: f64,
    pub elapsed_seconds: f64,
}

impl EstimatorReport {
    /// 95% normal confidence interval.
    pub fn confidence_interval(&self) -> (f64, f64) {
        (self.mean - 1.96 * self.std_error, self.mean + 1.96 * self.std_error)
    }
}

/// Per-sample estimator outputs for several payoffs evaluated on shared paths.
#[derive(Debug, Clone)]
pub struct EstimatorSamples {
    /// Row-major `n_samples x n_payoffs`.
    values: Vec<f64>,
    work: Vec<f64>,
    n_payoffs: usize,
    pub elapsed_seconds: f64,
}

impl EstimatorSamples {
    pub fn n_samples(&self) -> usize {
        self.work.len()
    }

    pub fn column(&self, payoff: usize) -> Vec<f64> {
        self.values.iter().skip(payoff).step_by(self.n_payoffs).copied().collect()
    }

    pub fn work(&self) -> &[f64] {
        &self.work
    }

    pub fn report(&self, payoff: usize) -> EstimatorReport {
        let xs = self.column(payoff);
        let (mean, var) = mean_variance(&xs);
        let n = xs.len() as f64;
        EstimatorReport {
            mean,
            std_error: (var / n).sqrt(),
            n_samples: xs.len() as u64,
            avg_work_units: pairwise_sum(&self.work) / n,
            elapsed_seconds: self.elapsed_seconds,
        }
    }
}

/// Pairwise summation with a split point depending only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Sample mean and unbiased variance, both by pairwise summation.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, pairwise_sum(&dev) / (n - 1.0))
}

/// One coupled-sum sample: draws the level, then accumulates the weighted level differences.
pub fn coupled_sum_sample<P: DiscountedPayoff>(
    p: &HestonParams,
    m: &RateModel,
    payoff: &P,
    d: &LevelDistribution,
    sample: &SampleSeed,
    max_level: Option<u32>,
) -> Result<(f64, f64)> {
    payoff.check(p)?;
    let mut z = [0.0];
    let work = coupled_sum_into(p, m, std::slice::from_ref(payoff), d, sample, max_level, &mut z)?;
    Ok((z[0], work))
}

/// Coupled sum with the random level replaced by `top`.
pub fn coupled_sum_at_level<P: DiscountedPayoff>(
    p: &HestonParams,
    m: &RateModel,
    payoff: &P,
    d: &LevelDistribution,
    top: u32,
    sample: &SampleSeed,
) -> Result<(f64, f64)> {
    payoff.check(p)?;
    if d.tail(top) <= 0.0 {
        return Err(Error::param(format!("level {top} has zero tail probability")));
    }
    let mut z = [0.0];
    let work = coupled_sum_levels(p, m, std::slice::from_ref(payoff), d, top, sample, &mut z)?;
    Ok((z[0], work))
}

fn coupled_sum_into<P: DiscountedPayoff>(
    p: &HestonParams,
    m: &RateModel,
    payoffs: &[P],
    d: &LevelDistribution,
    sample: &SampleSeed,
    max_level: Option<u32>,
    out: &mut [f64],
) -> Result<f64> {
    let mut top = sample_level(d, &mut sample.stream(Role::Level, 0));
    if let Some(cap) = max_level {
        top = top.min(cap);
    }
    coupled_sum_levels(p, m, payoffs, d, top, sample, out)
}

fn coupled_sum_levels<P: DiscountedPayoff>(
    p: &HestonParams,
    m: &RateModel,
    payoffs: &[P],
    d: &LevelDistribution,
    top: u32,
    sample: &SampleSeed,
    out: &mut [f64],
) -> Result<f64> {
    out.fill(0.0);
    let mut work = 0.0;
    for level in 0..=top {
        let path = simulate_path_sums(p, m, level, &mut sample.path_streams(level))?;
        let weight = d.tail(level).recip();
        for (slot, payoff) in out.iter_mut().zip(payoffs) {
            *slot += coupled_from_path(p, payoff, &path).delta() * weight;
        }
        work += f64::from(level).exp2();
    }
    Ok(work)
}

fn standard_into<P: DiscountedPayoff>(
    p: &HestonParams,
    m: &RateModel,
    payoffs: &[P],
    level: u32,
    sample: &SampleSeed,
    out: &mut [f64],
) -> Result<f64> {
    let path = simulate_path_sums(p, m, level, &mut sample.path_streams(level))?;
    let inputs = path.inputs(level);
    for (slot, payoff) in out.iter_mut().zip(payoffs) {
        *slot = payoff.discounted(p, &inputs);
    }
    Ok(f64::from(level).exp2())
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// Runs the estimator for several payoffs on shared paths and keeps every sample.
pub fn estimator_samples<P: DiscountedPayoff>(
    kind: EstimatorKind,
    p: &HestonParams,
    m: &RateModel,
    payoffs: &[P],
    d: &LevelDistribution,
    opts: &RunOptions,
) -> Result<EstimatorSamples> {
    if opts.n_samples < 2 {
        return Err(Error::param("at least two samples are required"));
    }
    if payoffs.is_empty() {
        return Err(Error::param("no payoffs to estimate"));
    }
    p.validate()?;
    m.validate()?;
    d.validate()?;
    for payoff in payoffs {
        payoff.check(p)?;
    }
    let k = payoffs.len();
    let n = opts.n_samples as usize;
    let started = Instant::now();
    let mut values = vec![0.0; n * k];
    let mut work = vec![0.0; n];
    thread_pool(opts.workers)?.install(|| {
        values
            .par_chunks_mut(k)
            .zip(work.par_iter_mut())
            .enumerate()
            .try_for_each(|(i, (out, w))| -> Result<()> {
                let sample = SampleSeed::new(opts.seed, i as u64);
                *w = match kind {
                    EstimatorKind::Standard { level } => standard_into(p, m, payoffs, level, &sample, out)?,
                    EstimatorKind::CoupledSum => coupled_sum_into(p, m, payoffs, d, &sample, opts.max_level, out)?,
                };
                Ok(())
            })
    })?;
    Ok(EstimatorSamples { values, work, n_payoffs: k, elapsed_seconds: started.elapsed().as_secs_f64() })
}

pub fn run_estimator_multi<P: DiscountedPayoff>(
    kind: EstimatorKind,
    p: &HestonParams,
    m: &RateModel,
    payoffs: &[P],
    d: &LevelDistribution,
    opts: &RunOptions,
) -> Result<Vec<EstimatorReport>> {
    let samples = estimator_samples(kind, p, m, payoffs, d, opts)?;
    Ok((0..payoffs.len()).map(|j| samples.report(j)).collect())
}

pub fn run_estimator<P: DiscountedPayoff>(
    kind: EstimatorKind,
    p: &HestonParams,
    m: &RateModel,
    payoff: &P,
    d: &LevelDistribution,
    opts: &RunOptions,
) -> Result<EstimatorReport> {
    let samples = estimator_samples(kind, p, m, std::slice::from_ref(payoff), d, opts)?;
    Ok(samples.report(0))
}

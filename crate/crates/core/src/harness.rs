//! Experiment drivers behind the command-line tool: strong convergence of the
//! level error, the RMSE comparison against a fine reference, and pricing.

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{has_errors, validate_config, Diagnostic, ExperimentConfig, Severity};
use crate::estimators::{
    estimator_samples, pairwise_sum, run_estimator_multi, thread_pool, EstimatorKind, EstimatorReport, RunOptions,
};
use crate::payoffs::{DiscountedPayoff, Payoff};
use crate::rng::{RngStream, SampleSeed};
use crate::scheme::simulate_path_sums;
use crate::{Error, Result};

/// Bootstrap replicates behind the slope standard error.
pub const BOOTSTRAP_REPLICATES: usize = 100;

/// Offset applied to the experiment seed for reference runs so that they never
/// share streams with the estimator under test.
pub const REFERENCE_SEED_OFFSET: u64 = 0x5EED_0000_0000;

pub fn reference_seed(seed: u64) -> u64 {
    seed.wrapping_add(REFERENCE_SEED_OFFSET)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HarnessOptions {
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    /// Caps the random level of the coupled sum.
    pub max_level: Option<u32>,
}

/// Runs [`validate_config`] and turns any error into [`Error::Config`].
/// Returns the remaining warnings.
pub fn ensure_valid(c: &ExperimentConfig) -> Result<Vec<Diagnostic>> {
    let diags = validate_config(c);
    if has_errors(&diags) {
        let msg: Vec<String> = diags
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| format!("[{}] {}", d.code, d.message))
            .collect();
        return Err(Error::Config(msg.join("; ")));
    }
    Ok(diags)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u32,
    pub h: f64,
    pub err: f64,
    pub err_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub payoff: Payoff,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log2(err)` against `n`; NaN with fewer than two fit levels.
    pub slope: f64,
    pub slope_se: f64,
    /// Levels entering the slope fit (those strictly below the reference).
    pub fit_levels: Vec<u32>,
    pub ref_level: u32,
    pub n_samples: u64,
    pub elapsed_seconds: f64,
}

/// Squared level errors `(Y_n - Y_ref)^2` for every sample, payoff and level.
#[derive(Debug, Clone)]
pub struct ConvergenceSamples {
    /// Layout `[sample][payoff][level]`.
    squared: Vec<f64>,
    n_payoffs: usize,
    n_levels: usize,
    pub elapsed_seconds: f64,
}

impl ConvergenceSamples {
    pub fn n_samples(&self) -> usize {
        self.squared.len() / (self.n_payoffs * self.n_levels)
    }

    pub fn column(&self, payoff: usize, level: usize) -> Vec<f64> {
        let stride = self.n_payoffs * self.n_levels;
        self.squared.iter().skip(payoff * self.n_levels + level).step_by(stride).copied().collect()
    }
}

/// One reference simulation per sample at `2^ref_level` steps yields every
/// coarser level, so all levels and payoffs share paths.
pub fn convergence_samples<P: DiscountedPayoff>(
    c: &ExperimentConfig,
    payoffs: &[P],
    opts: &HarnessOptions,
) -> Result<ConvergenceSamples> {
    if payoffs.is_empty() {
        return Err(Error::param("no payoffs to evaluate"));
    }
    if let Some(&n) = c.levels.iter().find(|&&n| n > c.ref_level) {
        return Err(Error::config(format!("level {n} is finer than ref_level {}", c.ref_level)));
    }
    for payoff in payoffs {
        payoff.check(&c.heston)?;
    }
    let (k, l) = (payoffs.len(), c.levels.len());
    let n = c.samples as usize;
    let started = Instant::now();
    let mut squared = vec![0.0; n * k * l];
    thread_pool(opts.workers)?.install(|| {
        squared.par_chunks_mut(k * l).enumerate().try_for_each(|(i, out)| -> Result<()> {
            let mut streams = SampleSeed::new(c.seed, i as u64).path_streams(c.ref_level);
            let path = simulate_path_sums(&c.heston, &c.rate, c.ref_level, &mut streams)?;
            let fine = path.inputs(c.ref_level);
            for (j, payoff) in payoffs.iter().enumerate() {
                let y_ref = payoff.discounted(&c.heston, &fine);
                for (li, &level) in c.levels.iter().enumerate() {
                    let diff = payoff.discounted(&c.heston, &path.inputs(level)) - y_ref;
                    out[j * l + li] = diff * diff;
                }
            }
            Ok(())
        })
    })?;
    Ok(ConvergenceSamples { squared, n_payoffs: k, n_levels: l, elapsed_seconds: started.elapsed().as_secs_f64() })
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn run_convergence(c: &ExperimentConfig, opts: &HarnessOptions) -> Result<Vec<ConvergenceReport>> {
    ensure_valid(c)?;
    let samples = convergence_samples(c, &c.payoffs, opts)?;
    let n = samples.n_samples();
    let fit: Vec<usize> = (0..c.levels.len()).filter(|&li| c.levels[li] < c.ref_level).collect();
    let fit_levels: Vec<u32> = fit.iter().map(|&li| c.levels[li]).collect();
    let xs: Vec<f64> = fit_levels.iter().map(|&v| f64::from(v)).collect();

    let mut reports = Vec::with_capacity(c.payoffs.len());
    let mut columns = Vec::with_capacity(c.payoffs.len());
    for (j, payoff) in c.payoffs.iter().enumerate() {
        let mut rows = Vec::with_capacity(c.levels.len());
        let mut cols = Vec::with_capacity(c.levels.len());
        for (li, &level) in c.levels.iter().enumerate() {
            let col = samples.column(j, li);
            let mean = pairwise_sum(&col) / n as f64;
            let dev: Vec<f64> = col.iter().map(|x| (x - mean) * (x - mean)).collect();
            let var = pairwise_sum(&dev) / (n as f64 - 1.0);
            rows.push(ConvergenceRow { n: level, h: c.heston.t / f64::from(level).exp2(), err: mean, err_se: (var / n as f64).sqrt() });
            cols.push(col);
        }
        for &li in &fit {
            if !(rows[li].err > 0.0) {
                return Err(Error::Diagnostic(format!(
                    "{payoff}: mean squared error at level {} is zero; increase the sample count",
                    rows[li].n
                )));
            }
        }
        let slope = if fit.len() >= 2 {
            let ys: Vec<f64> = fit.iter().map(|&li| rows[li].err.log2()).collect();
            ols_slope(&xs, &ys)
        } else {
            f64::NAN
        };
        reports.push(ConvergenceReport {
            payoff: *payoff,
            rows,
            slope,
            slope_se: f64::NAN,
            fit_levels: fit_levels.clone(),
            ref_level: c.ref_level,
            n_samples: n as u64,
            elapsed_seconds: samples.elapsed_seconds,
        });
        columns.push(cols);
    }

    if fit.len() >= 2 {
        let mut rng = RngStream::from_seed(c.seed ^ 0xB007_5742);
        let mut slopes = vec![Vec::with_capacity(BOOTSTRAP_REPLICATES); c.payoffs.len()];
        let mut idx = vec![0usize; n];
        for _ in 0..BOOTSTRAP_REPLICATES {
            for slot in idx.iter_mut() {
                *slot = ((rng.uniform() * n as f64) as usize).min(n - 1);
            }
            for (j, cols) in columns.iter().enumerate() {
                let ys: Vec<f64> = fit
                    .iter()
                    .map(|&li| (idx.iter().map(|&i| cols[li][i]).sum::<f64>() / n as f64).log2())
                    .collect();
                let s = ols_slope(&xs, &ys);
                if s.is_finite() {
                    slopes[j].push(s);
                }
            }
        }
        for (report, s) in reports.iter_mut().zip(slopes) {
            if s.len() >= 2 {
                let m = s.iter().sum::<f64>() / s.len() as f64;
                let v = s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (s.len() as f64 - 1.0);
                report.slope_se = v.sqrt();
            }
        }
    }
    Ok(reports)
}

/// One line of the RMSE table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub model: String,
    pub payoff: String,
    pub rmse: f64,
    pub rmse_se: f64,
    pub avg_work: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseResult {
    pub row: RmseRow,
    pub estimate: EstimatorReport,
    pub reference: EstimatorReport,
}

/// `sqrt(se^2 + (mean - reference)^2)` and its delta-method standard error.
pub fn rmse_against_reference(estimate: &EstimatorReport, reference: &EstimatorReport) -> (f64, f64) {
    let bias = estimate.mean - reference.mean;
    let se2 = estimate.std_error * estimate.std_error;
    let rmse = (se2 + bias * bias).sqrt();
    let bias_var = se2 + reference.std_error * reference.std_error;
    let se2_var = 2.0 * se2 * se2 / (estimate.n_samples as f64 - 1.0).max(1.0);
    let rmse_se = if rmse > 0.0 { (4.0 * bias * bias * bias_var + se2_var).sqrt() / (2.0 * rmse) } else { 0.0 };
    (rmse, rmse_se)
}

/// Reference prices from the standard estimator at `ref_level`, on streams disjoint from the experiment seed.
pub fn reference_prices(c: &ExperimentConfig, opts: &HarnessOptions) -> Result<Vec<EstimatorReport>> {
    let run = RunOptions { n_samples: c.samples, seed: reference_seed(c.seed), workers: opts.workers, max_level: None };
    run_estimator_multi(
        EstimatorKind::Standard { level: c.ref_level },
        &c.heston,
        &c.rate,
        &c.payoffs,
        &c.level_distribution(),
        &run,
    )
}

/// Coupled-sum run scored against given reference prices, one per payoff.
pub fn rmse_against(
    c: &ExperimentConfig,
    references: &[EstimatorReport],
    opts: &HarnessOptions,
) -> Result<Vec<RmseResult>> {
    if references.len() != c.payoffs.len() {
        return Err(Error::param("one reference price per payoff is required"));
    }
    let run = RunOptions { n_samples: c.samples, seed: c.seed, workers: opts.workers, max_level: opts.max_level };
    let samples = estimator_samples(
        EstimatorKind::CoupledSum,
        &c.heston,
        &c.rate,
        &c.payoffs,
        &c.level_distribution(),
        &run,
    )?;
    Ok(c
        .payoffs
        .iter()
        .zip(references)
        .enumerate()
        .map(|(j, (payoff, reference))| {
            let estimate = samples.report(j);
            let (rmse, rmse_se) = rmse_against_reference(&estimate, reference);
            RmseResult {
                row: RmseRow {
                    model: c.rate.label().to_string(),
                    payoff: payoff.name().to_string(),
                    rmse,
                    rmse_se,
                    avg_work: estimate.avg_work_units,
                    elapsed_s: estimate.elapsed_seconds,
                },
                estimate,
                reference: *reference,
            }
        })
        .collect())
}

pub fn run_rmse_table(c: &ExperimentConfig, opts: &HarnessOptions) -> Result<Vec<RmseResult>> {
    ensure_valid(c)?;
    let references = reference_prices(c, opts)?;
    rmse_against(c, &references, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRow {
    pub payoff: String,
    pub mean: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub avg_work: f64,
    pub n_samples: u64,
}

pub fn run_price(c: &ExperimentConfig, opts: &HarnessOptions) -> Result<Vec<PriceRow>> {
    ensure_valid(c)?;
    let run = RunOptions { n_samples: c.samples, seed: c.seed, workers: opts.workers, max_level: opts.max_level };
    let reports = run_estimator_multi(
        EstimatorKind::CoupledSum,
        &c.heston,
        &c.rate,
        &c.payoffs,
        &c.level_distribution(),
        &run,
    )?;
    Ok(c
        .payoffs
        .iter()
        .zip(reports)
        .map(|(payoff, r)| {
            let (ci_lo, ci_hi) = r.confidence_interval();
            PriceRow {
                payoff: payoff.name().to_string(),
                mean: r.mean,
                std_error: r.std_error,
                ci_lo,
                ci_hi,
                avg_work: r.avg_work_units,
                n_samples: r.n_samples,
            }
        })
        .collect())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// `out.csv` becomes `out_put.csv` for the payoff named `put`.
pub fn payoff_path(path: &Path, payoff: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{payoff}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{payoff}"),
    };
    path.with_file_name(name)
}

/// Sidecar with the slope fit, written next to a convergence CSV.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes one CSV per payoff (or `path` itself for a single payoff) plus a JSON
/// sidecar holding the slope, its standard error and the fit window.
pub fn write_convergence(path: &Path, reports: &[ConvergenceReport]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for report in reports {
        let target = if reports.len() == 1 { path.to_path_buf() } else { payoff_path(path, report.payoff.name()) };
        write_csv(&target, &report.rows)?;
        let meta = serde_json::json!({
            "payoff": report.payoff,
            "slope": finite_or_null(report.slope),
            "slope_se": finite_or_null(report.slope_se),
            "fit_levels": report.fit_levels,
            "ref_level": report.ref_level,
            "n_samples": report.n_samples,
            "elapsed_seconds": report.elapsed_seconds,
        });
        std::fs::write(metadata_path(&target), serde_json::to_string_pretty(&meta)?)?;
        written.push(target);
    }
    Ok(written)
}

fn finite_or_null(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Benchmark;

    fn small(b: Benchmark) -> ExperimentConfig {
        ExperimentConfig { samples: 2000, ref_level: 6, levels: vec![1, 2, 3, 4], ..ExperimentConfig::benchmark(b) }
    }

    #[test]
    fn slope_of_exact_line() {
        let x = [2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 2.0 * v).collect();
        assert!((ols_slope(&x, &y) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn reference_level_has_zero_error() {
        let c = ExperimentConfig { levels: vec![6], ..small(Benchmark::HullWhite) };
        let r = run_convergence(&c, &HarnessOptions::default()).unwrap();
        for report in &r {
            assert_eq!(report.rows[0].err, 0.0);
            assert_eq!(report.rows[0].err_se, 0.0);
            assert!(report.slope.is_nan());
        }
    }

    #[test]
    fn level_above_reference_is_rejected() {
        let c = ExperimentConfig { levels: vec![3, 7], ..small(Benchmark::HullWhite) };
        assert!(matches!(run_convergence(&c, &HarnessOptions::default()), Err(Error::Config(_))));
    }

    #[test]
    fn errors_decay_with_level() {
        let r = run_convergence(&small(Benchmark::CirExact), &HarnessOptions::default()).unwrap();
        for report in &r {
            assert!(report.slope < -1.0, "{}: slope {}", report.payoff, report.slope);
            assert!(report.slope_se > 0.0 && report.slope_se < 0.5);
            assert_eq!(report.fit_levels, vec![1, 2, 3, 4]);
        }
    }

    #[test]
    fn rmse_of_exact_match_is_standard_error() {
        let e = EstimatorReport { mean: 1.0, std_error: 0.01, n_samples: 100, avg_work_units: 1.0, elapsed_seconds: 0.0 };
        let (rmse, _) = rmse_against_reference(&e, &e);
        assert_eq!(rmse, 0.01);
        let r = EstimatorReport { mean: 1.03, ..e };
        let (rmse, se) = rmse_against_reference(&e, &r);
        assert!((rmse - 0.001f64.sqrt()).abs() < 1e-12);
        assert!(se > 0.0);
    }

    #[test]
    fn payoff_paths() {
        assert_eq!(payoff_path(Path::new("/tmp/out.csv"), "put"), PathBuf::from("/tmp/out_put.csv"));
        assert_eq!(metadata_path(Path::new("a/b.csv")), PathBuf::from("a/b.meta.json"));
    }

    #[test]
    fn price_rows_are_worker_independent() {
        let c = ExperimentConfig { samples: 300, ..ExperimentConfig::benchmark(Benchmark::BlackKarasinski) };
        let a = run_price(&c, &HarnessOptions { workers: 1, max_level: None }).unwrap();
        let b = run_price(&c, &HarnessOptions { workers: 3, max_level: None }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }
}

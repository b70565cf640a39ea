//! Sample statistics and the exact-sampler moment suite.

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::distributions::{sample_ncx2, NcChiSqParams};
use crate::rates::{bk_transition, cir_exact_transition, hw_transition, RateModel};
use crate::rng::{RngStream, Role, SampleSeed};
use crate::variance::{variance_transition, SquareRootTransition};
use crate::Result;

/// First moments of a sample together with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub se_mean: f64,
    /// Asymptotic standard error of the sample variance, `sqrt((m4 - s^4) / n)`.
    pub se_variance: f64,
}

impl SampleMoments {
    pub fn from_slice(xs: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 2, "need at least two observations");
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let (mut m2, mut m4) = (0.0, 0.0);
        for &x in xs {
            let d2 = (x - mean) * (x - mean);
            m2 += d2;
            m4 += d2 * d2;
        }
        let variance = m2 / (nf - 1.0);
        let m4 = m4 / nf;
        let biased = m2 / nf;
        Self {
            n,
            mean,
            variance,
            se_mean: (variance / nf).sqrt(),
            se_variance: ((m4 - biased * biased).max(0.0) / nf).sqrt(),
        }
    }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample statistic at significance `alpha`.
pub fn ks_critical_value(alpha: f64, na: usize, nb: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let (na, nb) = (na as f64, nb as f64);
    c * ((na + nb) / (na * nb)).sqrt()
}

/// Largest accepted `|estimate - expected| / std_error` in the moment suite.
pub const MOMENT_Z_LIMIT: f64 = 4.0;

/// One sampled moment compared with its closed form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheck {
    pub name: String,
    pub expected: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z_score: f64,
    pub passed: bool,
}

fn push_checks(out: &mut Vec<MomentCheck>, name: &str, xs: &[f64], mean: f64, variance: f64) {
    let m = SampleMoments::from_slice(xs);
    for (what, expected, estimate, se) in
        [("mean", mean, m.mean, m.se_mean), ("variance", variance, m.variance, m.se_variance)]
    {
        let z_score = if se > 0.0 { (estimate - expected) / se } else if estimate == expected { 0.0 } else { f64::INFINITY };
        out.push(MomentCheck {
            name: format!("{name} {what}"),
            expected,
            estimate,
            std_error: se,
            z_score,
            passed: z_score.abs() <= MOMENT_Z_LIMIT,
        });
    }
}

fn draws(n: usize, seed: u64, role: Role, mut f: impl FnMut(&mut RngStream) -> Result<f64>) -> Result<Vec<f64>> {
    (0..n as u64).map(|i| f(&mut SampleSeed::new(seed, i).stream(role, 0))).collect()
}

/// Samples the exact transition laws of the configured model over the whole
/// horizon and compares their first two moments with closed forms.
pub fn moment_suite(c: &ExperimentConfig, n: usize, seed: u64) -> Result<Vec<MomentCheck>> {
    let p = &c.heston;
    p.validate()?;
    c.rate.validate()?;
    let mut out = Vec::new();

    let law = SquareRootTransition::new(p.k, p.theta, p.sigma, p.t)?;
    let ncx = NcChiSqParams::new(law.dof(), law.noncentrality(p.v0))?;
    let xs = draws(n, seed, Role::Auxiliary, |rng| Ok(sample_ncx2(&ncx, rng)))?;
    push_checks(&mut out, "noncentral chi-squared", &xs, ncx.mean(), ncx.variance());

    let (mean, var) = square_root_moments(p.k, p.theta, p.sigma, p.v0, p.t);
    let xs = draws(n, seed, Role::Variance, |rng| variance_transition(p, p.v0, p.t, rng))?;
    push_checks(&mut out, "variance transition", &xs, mean, var);

    match &c.rate {
        RateModel::Cir(m) => {
            let (mean, var) = square_root_moments(m.alpha, m.beta, m.gamma, m.r0, p.t);
            let xs = draws(n, seed, Role::Rate, |rng| cir_exact_transition(m, m.r0, p.t, rng))?;
            push_checks(&mut out, "CIR transition", &xs, mean, var);
        }
        RateModel::HullWhite(m) => {
            let (mean, var) = m.transition_moments(m.r0, 0.0, p.t);
            let xs = draws(n, seed, Role::Rate, |rng| hw_transition(m, m.r0, 0.0, p.t, rng))?;
            push_checks(&mut out, "Hull-White transition", &xs, mean, var);
        }
        RateModel::BlackKarasinski(m) => {
            let (mean, var) = m.log_transition_moments(m.r0, 0.0, p.t);
            let xs = draws(n, seed, Role::Rate, |rng| Ok(bk_transition(m, m.r0, 0.0, p.t, rng)?.ln()))?;
            push_checks(&mut out, "Black-Karasinski log transition", &xs, mean, var);
        }
    }
    Ok(out)
}

/// Conditional mean and variance of a square-root diffusion after `dt`.
pub fn square_root_moments(kappa: f64, mean: f64, vol: f64, x0: f64, dt: f64) -> (f64, f64) {
    let e = (-kappa * dt).exp();
    let m = mean + (x0 - mean) * e;
    let v = x0 * vol * vol * e * (1.0 - e) / kappa + mean * vol * vol * (1.0 - e).powi(2) / (2.0 * kappa);
    (m, v)
}


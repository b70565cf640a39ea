//! Exact samplers for the transition laws of square-root diffusions.
//!
//! Poisson draws use sequential inversion below a mean of 10 and Hörmann's
//! transformed rejection with squeeze (PTRS) above it. Gamma draws use the
//! Marsaglia-Tsang squeeze for shape >= 1 and the `U^(1/a)` boost below.
//! Noncentral chi-squared draws with more than one degree of freedom use
//! `(Z + sqrt(lambda))^2 + chi2(d - 1)`; otherwise a Poisson mixture of
//! central chi-squared laws.

use crate::rng::RngStream;
use crate::{Error, Result};

const INVERSION_LIMIT: f64 = 10.0;

pub fn sample_poisson(mean: f64, rng: &mut RngStream) -> Result<u64> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(Error::param(format!("poisson mean must be finite and >= 0, got {mean}")));
    }
    Ok(poisson(mean, rng))
}

pub(crate) fn poisson(mean: f64, rng: &mut RngStream) -> u64 {
    if mean < INVERSION_LIMIT {
        poisson_inversion(mean, rng)
    } else {
        poisson_ptrs(mean, rng)
    }
}

fn poisson_inversion(mean: f64, rng: &mut RngStream) -> u64 {
    let u = rng.uniform();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        // Round-off can leave the cdf a few ulps short of 1.
        if p < 1e-300 {
            break;
        }
    }
    k
}

fn poisson_ptrs(mean: f64, rng: &mut RngStream) -> u64 {
    let log_mean = mean.ln();
    let b = 0.931 + 2.53 * mean.sqrt();
    let a = -0.059 + 0.02483 * b;
    let log_inv_alpha = (1.1239 + 1.1328 / (b - 3.4)).ln();
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform();
        let us = 0.5 - u.abs();
        let kf = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return kf as u64;
        }
        if !(kf >= 0.0) || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + log_inv_alpha - (a / (us * us) + b).ln();
        let rhs = -mean + kf * log_mean - libm::lgamma(kf + 1.0);
        if lhs <= rhs {
            return kf as u64;
        }
    }
}

pub fn sample_gamma(shape: f64, scale: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape.is_finite() && shape > 0.0) {
        return Err(Error::param(format!("gamma shape must be > 0, got {shape}")));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::param(format!("gamma scale must be > 0, got {scale}")));
    }
    Ok(scale * GammaSampler::new(shape).sample(rng))
}

/// Unit-scale gamma sampler with its Marsaglia-Tsang constants precomputed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GammaSampler {
    d: f64,
    c: f64,
    /// `1/shape` when the shape was boosted by one.
    boost: Option<f64>,
}

impl GammaSampler {
    pub(crate) fn new(shape: f64) -> Self {
        debug_assert!(shape > 0.0);
        let (a, boost) = if shape < 1.0 {
            (shape + 1.0, Some(1.0 / shape))
        } else {
            (shape, None)
        };
        let d = a - 1.0 / 3.0;
        Self { d, c: 1.0 / (9.0 * d).sqrt(), boost }
    }

    #[inline]
    pub(crate) fn sample(&self, rng: &mut RngStream) -> f64 {
        let g = loop {
            let x = rng.standard_normal();
            let v = 1.0 + self.c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = rng.uniform_pos();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                break self.d * v;
            }
            if u.ln() < 0.5 * x2 + self.d * (1.0 - v + v.ln()) {
                break self.d * v;
            }
        };
        match self.boost {
            Some(inv_shape) => g * (rng.uniform_pos().ln() * inv_shape).exp(),
            None => g,
        }
    }
}

/// Degrees of freedom and noncentrality of a noncentral chi-squared law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcChiSqParams {
    dof: f64,
    noncentrality: f64,
}

impl NcChiSqParams {
    pub fn new(dof: f64, noncentrality: f64) -> Result<Self> {
        if !(dof.is_finite() && dof > 0.0) {
            return Err(Error::param(format!("degrees of freedom must be > 0, got {dof}")));
        }
        if !(noncentrality.is_finite() && noncentrality >= 0.0) {
            return Err(Error::param(format!(
                "noncentrality must be finite and >= 0, got {noncentrality}"
            )));
        }
        Ok(Self { dof, noncentrality })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn noncentrality(&self) -> f64 {
        self.noncentrality
    }

    pub fn mean(&self) -> f64 {
        self.dof + self.noncentrality
    }

    pub fn variance(&self) -> f64 {
        2.0 * (self.dof + 2.0 * self.noncentrality)
    }
}

/// Which construction a noncentral chi-squared draw uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NcxBranch {
    /// Decomposition when `dof > 1`, Poisson mixture otherwise.
    #[default]
    Auto,
    Decomposition,
    PoissonMixture,
}

pub fn sample_ncx2(p: &NcChiSqParams, rng: &mut RngStream) -> f64 {
    Ncx2Sampler::with_dof(p.dof).sample(p.noncentrality, rng)
}

/// Draws with a forced construction. Forcing the decomposition needs `dof >= 1`.
pub fn sample_ncx2_branch(p: &NcChiSqParams, branch: NcxBranch, rng: &mut RngStream) -> Result<f64> {
    Ok(Ncx2Sampler::new(p.dof, branch)?.sample(p.noncentrality, rng))
}

/// Noncentral chi-squared sampler for a fixed number of degrees of freedom.
/// The noncentrality is supplied per draw, which is how chained transitions use it.
#[derive(Debug, Clone, Copy)]
pub struct Ncx2Sampler {
    dof: f64,
    kind: SamplerKind,
}

#[derive(Debug, Clone, Copy)]
enum SamplerKind {
    /// Central part has `dof - 1` degrees of freedom; `None` when that is zero.
    Decomposition(Option<GammaSampler>),
    Mixture,
}

impl Ncx2Sampler {
    pub fn new(dof: f64, branch: NcxBranch) -> Result<Self> {
        if !(dof.is_finite() && dof > 0.0) {
            return Err(Error::param(format!("degrees of freedom must be > 0, got {dof}")));
        }
        let kind = match branch {
            NcxBranch::Auto if dof > 1.0 => Self::decomposition(dof),
            NcxBranch::Auto | NcxBranch::PoissonMixture => SamplerKind::Mixture,
            NcxBranch::Decomposition if dof >= 1.0 => Self::decomposition(dof),
            NcxBranch::Decomposition => {
                return Err(Error::param(format!(
                    "decomposition needs at least one gaussian degree of freedom, got dof {dof}"
                )))
            }
        };
        Ok(Self { dof, kind })
    }

    pub(crate) fn with_dof(dof: f64) -> Self {
        let kind = if dof > 1.0 { Self::decomposition(dof) } else { SamplerKind::Mixture };
        Self { dof, kind }
    }

    fn decomposition(dof: f64) -> SamplerKind {
        let rest = dof - 1.0;
        SamplerKind::Decomposition((rest > 0.0).then(|| GammaSampler::new(0.5 * rest)))
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    #[inline]
    pub fn sample(&self, noncentrality: f64, rng: &mut RngStream) -> f64 {
        match &self.kind {
            SamplerKind::Decomposition(central) => {
                let z = rng.standard_normal() + noncentrality.sqrt();
                let rest = central.as_ref().map_or(0.0, |g| 2.0 * g.sample(rng));
                z * z + rest
            }
            SamplerKind::Mixture => {
                let j = poisson(0.5 * noncentrality, rng);
                let shape = 0.5 * self.dof + j as f64;
                2.0 * GammaSampler::new(shape).sample(rng)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{ks_two_sample, ks_critical_value, SampleMoments};
    use proptest::prelude::*;

    fn collect(n: usize, seed: u64, mut f: impl FnMut(&mut RngStream) -> f64) -> Vec<f64> {
        let mut rng = RngStream::from_seed(seed);
        (0..n).map(|_| f(&mut rng)).collect()
    }

    #[test]
    fn poisson_zero_mean_is_zero() {
        let mut rng = RngStream::from_seed(1);
        assert!((0..1000).all(|_| sample_poisson(0.0, &mut rng).unwrap() == 0));
    }

    #[test]
    fn poisson_small_mean() {
        let xs = collect(1_000_000, 2, |r| sample_poisson(4.0, r).unwrap() as f64);
        let m = SampleMoments::from_slice(&xs);
        assert!((m.mean - 4.0).abs() <= 4.0 * (4.0f64 / 1e6).sqrt(), "mean {}", m.mean);
    }

    #[test]
    fn poisson_small_mean_pmf() {
        let n = 400_000;
        let mean: f64 = 3.0;
        let mut counts = [0usize; 10];
        let mut rng = RngStream::from_seed(3);
        for _ in 0..n {
            let k = sample_poisson(mean, &mut rng).unwrap() as usize;
            if k < counts.len() {
                counts[k] += 1;
            }
        }
        let mut pmf = (-mean).exp();
        for (k, &c) in counts.iter().enumerate() {
            if k > 0 {
                pmf *= mean / k as f64;
            }
            let freq = c as f64 / n as f64;
            let se = (pmf * (1.0 - pmf) / n as f64).sqrt();
            assert!((freq - pmf).abs() <= 4.0 * se, "k={k} freq={freq} pmf={pmf}");
        }
    }

    #[test]
    fn poisson_large_mean_variance() {
        let xs = collect(100_000, 4, |r| sample_poisson(5000.0, r).unwrap() as f64);
        let m = SampleMoments::from_slice(&xs);
        assert!((m.variance / 5000.0 - 1.0).abs() < 0.05, "var {}", m.variance);
        assert!((m.mean - 5000.0).abs() <= 4.0 * m.se_mean);
    }

    #[test]
    fn poisson_ptrs_moderate_mean() {
        let xs = collect(500_000, 5, |r| sample_poisson(12.5, r).unwrap() as f64);
        let m = SampleMoments::from_slice(&xs);
        assert!((m.mean - 12.5).abs() <= 4.0 * m.se_mean);
        assert!((m.variance - 12.5).abs() <= 4.0 * m.se_variance);
    }

    #[test]
    fn poisson_rejects_bad_mean() {
        let mut rng = RngStream::from_seed(0);
        assert!(sample_poisson(-1.0, &mut rng).is_err());
        assert!(sample_poisson(f64::NAN, &mut rng).is_err());
        assert!(sample_poisson(f64::INFINITY, &mut rng).is_err());
    }

    #[test]
    fn gamma_exponential_case() {
        let xs = collect(1_000_000, 6, |r| sample_gamma(1.0, 2.0, r).unwrap());
        let m = SampleMoments::from_slice(&xs);
        assert!((m.mean - 2.0).abs() <= 4.0 * m.se_mean, "mean {}", m.mean);
    }

    #[test]
    fn gamma_small_shape() {
        let xs = collect(1_000_000, 7, |r| sample_gamma(0.3, 2.0, r).unwrap());
        let m = SampleMoments::from_slice(&xs);
        assert!((m.mean - 0.6).abs() <= 4.0 * m.se_mean, "mean {}", m.mean);
        assert!(xs.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn gamma_variance() {
        let xs = collect(1_000_000, 8, |r| sample_gamma(4.48, 2.0, r).unwrap());
        let m = SampleMoments::from_slice(&xs);
        // shape * scale^2
        assert!((m.variance - 17.92).abs() <= 4.0 * m.se_variance, "var {}", m.variance);
    }

    #[test]
    fn gamma_rejects_bad_params() {
        let mut rng = RngStream::from_seed(0);
        assert!(sample_gamma(0.0, 1.0, &mut rng).is_err());
        assert!(sample_gamma(1.0, -2.0, &mut rng).is_err());
    }

    #[test]
    fn ncx2_central_case() {
        let p = NcChiSqParams::new(2.0, 0.0).unwrap();
        let xs = collect(1_000_000, 9, |r| sample_ncx2(&p, r));
        let m = SampleMoments::from_slice(&xs);
        assert!((m.mean - 2.0).abs() <= 4.0 * m.se_mean);
    }

    #[test]
    fn ncx2_variance_block_moments() {
        // dof = 4 * 2.8 * 0.05 / 0.25^2
        let p = NcChiSqParams::new(8.96, 3.0).unwrap();
        let xs = collect(1_000_000, 10, |r| sample_ncx2(&p, r));
        let m = SampleMoments::from_slice(&xs);
        assert!((m.mean - 11.96).abs() <= 4.0 * m.se_mean, "mean {}", m.mean);
        assert!((m.variance - 29.92).abs() <= 4.0 * m.se_variance, "var {}", m.variance);
    }

    #[test]
    fn ncx2_mixture_branch() {
        let p = NcChiSqParams::new(0.5, 10.0).unwrap();
        let xs = collect(1_000_000, 11, |r| sample_ncx2(&p, r));
        let m = SampleMoments::from_slice(&xs);
        assert!((m.mean - 10.5).abs() <= 4.0 * m.se_mean, "mean {}", m.mean);
        assert!((m.variance - p.variance()).abs() <= 4.0 * m.se_variance);
    }

    #[test]
    fn ncx2_branches_agree_in_distribution() {
        let p = NcChiSqParams::new(1.5, 2.0).unwrap();
        let a = collect(100_000, 12, |r| sample_ncx2_branch(&p, NcxBranch::Decomposition, r).unwrap());
        let b = collect(100_000, 13, |r| sample_ncx2_branch(&p, NcxBranch::PoissonMixture, r).unwrap());
        let d = ks_two_sample(&a, &b);
        assert!(d < ks_critical_value(0.01, a.len(), b.len()), "ks {d}");
    }

    #[test]
    fn ncx2_unit_dof_decomposition() {
        let p = NcChiSqParams::new(1.0, 4.0).unwrap();
        let xs = collect(400_000, 14, |r| sample_ncx2_branch(&p, NcxBranch::Decomposition, r).unwrap());
        let m = SampleMoments::from_slice(&xs);
        assert!((m.mean - 5.0).abs() <= 4.0 * m.se_mean);
    }

    #[test]
    fn forced_decomposition_needs_one_dof() {
        let p = NcChiSqParams::new(0.5, 1.0).unwrap();
        let mut rng = RngStream::from_seed(0);
        assert!(sample_ncx2_branch(&p, NcxBranch::Decomposition, &mut rng).is_err());
    }

    #[test]
    fn ncx2_param_validation() {
        assert!(NcChiSqParams::new(0.0, 1.0).is_err());
        assert!(NcChiSqParams::new(1.0, -1.0).is_err());
        assert!(NcChiSqParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn ncx2_is_deterministic_per_stream() {
        let p = NcChiSqParams::new(4.608, 1.7).unwrap();
        assert_eq!(collect(100, 77, |r| sample_ncx2(&p, r)), collect(100, 77, |r| sample_ncx2(&p, r)));
    }

    proptest! {
        #[test]
        fn ncx2_draws_are_nonnegative(dof in 0.01f64..20.0, nc in 0.0f64..5000.0, seed in any::<u64>()) {
            let p = NcChiSqParams::new(dof, nc).unwrap();
            let mut rng = RngStream::from_seed(seed);
            for _ in 0..32 {
                let x = sample_ncx2(&p, &mut rng);
                prop_assert!(x >= 0.0 && x.is_finite());
            }
        }

        #[test]
        fn gamma_draws_are_finite(shape in 0.01f64..1000.0, seed in any::<u64>()) {
            let mut rng = RngStream::from_seed(seed);
            for _ in 0..32 {
                let x = sample_gamma(shape, 1.0, &mut rng).unwrap();
                prop_assert!(x >= 0.0 && x.is_finite());
            }
        }
    }
}

//! Exact simulation of the Heston variance on a dyadic grid.

use serde::{Deserialize, Serialize};

use crate::distributions::Ncx2Sampler;
use crate::grid::{level_of, DyadicSums};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Equity and variance block of the model plus the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    /// Mean-reversion speed of the variance.
    pub k: f64,
    /// Long-run variance.
    pub theta: f64,
    /// Volatility of variance.
    pub sigma: f64,
    pub rho: f64,
    pub s0: f64,
    pub v0: f64,
    /// Horizon in years.
    pub t: f64,
}

impl HestonParams {
    pub fn new(k: f64, theta: f64, sigma: f64, rho: f64, s0: f64, v0: f64, t: f64) -> Result<Self> {
        let p = Self { k, theta, sigma, rho, s0, v0, t };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k", self.k),
            ("theta", self.theta),
            ("sigma", self.sigma),
            ("s0", self.s0),
            ("v0", self.v0),
            ("t", self.t),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("heston.{name} must be > 0, got {v}")));
            }
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::param(format!("heston.rho must lie in [-1, 1], got {}", self.rho)));
        }
        Ok(())
    }

    /// `2 k theta / sigma^2`; above one the variance never touches zero.
    pub fn feller_index(&self) -> f64 {
        2.0 * self.k * self.theta / (self.sigma * self.sigma)
    }
}

/// Exact one-step transition of `dX = kappa (mean - X) dt + vol sqrt(X) dW`
/// for a fixed step `dt`: a scaled noncentral chi-squared draw.
#[derive(Debug, Clone, Copy)]
pub struct SquareRootTransition {
    scale: f64,
    nc_factor: f64,
    sampler: Ncx2Sampler,
}

impl SquareRootTransition {
    pub fn new(kappa: f64, mean: f64, vol: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param(format!("time step must be > 0, got {dt}")));
        }
        let vol2 = vol * vol;
        let one_minus_decay = -(-kappa * dt).exp_m1();
        let scale = vol2 * one_minus_decay / (4.0 * kappa);
        let nc_factor = 4.0 * kappa * (-kappa * dt).exp() / (vol2 * one_minus_decay);
        let dof = 4.0 * kappa * mean / vol2;
        Ok(Self { scale, nc_factor, sampler: Ncx2Sampler::with_dof(dof) })
    }

    pub fn dof(&self) -> f64 {
        self.sampler.dof()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn noncentrality(&self, x_from: f64) -> f64 {
        self.nc_factor * x_from
    }

    #[inline]
    pub fn sample(&self, x_from: f64, rng: &mut RngStream) -> f64 {
        self.scale * self.sampler.sample(self.nc_factor * x_from, rng)
    }
}

pub fn variance_transition(params: &HestonParams, v_from: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
    if !(v_from.is_finite() && v_from >= 0.0) {
        return Err(Error::param(format!("variance must be >= 0, got {v_from}")));
    }
    let step = SquareRootTransition::new(params.k, params.theta, params.sigma, dt)?;
    Ok(step.sample(v_from, rng))
}

/// Terminal variance and the left-endpoint integral sums at step `h` and `2h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceDraw {
    pub v_terminal: f64,
    pub fine_integral: f64,
    /// Equal to `fine_integral` for a single-step path.
    pub coarse_integral: f64,
}

/// Integral sums of one variance path on every dyadic subgrid up to `top_level`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSums {
    pub v_terminal: f64,
    /// `integrals[l]` is the left-endpoint sum at step `T / 2^l`.
    pub integrals: Vec<f64>,
}

pub fn simulate_variance(params: &HestonParams, n_steps: u64, rng: &mut RngStream) -> Result<VarianceDraw> {
    let top = level_of(n_steps)?;
    let sums = simulate_variance_levels(params, top, rng)?;
    let fine = sums.integrals[top as usize];
    let coarse = if top == 0 { fine } else { sums.integrals[top as usize - 1] };
    Ok(VarianceDraw { v_terminal: sums.v_terminal, fine_integral: fine, coarse_integral: coarse })
}

pub fn simulate_variance_levels(params: &HestonParams, top_level: u32, rng: &mut RngStream) -> Result<VarianceSums> {
    crate::grid::check_level(top_level)?;
    let n = 1u64 << top_level;
    let step = SquareRootTransition::new(params.k, params.theta, params.sigma, params.t / n as f64)?;
    let mut sums = DyadicSums::new(top_level);
    let mut v = params.v0;
    for i in 0..n {
        sums.push(i, v);
        v = step.sample(v, rng);
    }
    Ok(VarianceSums { v_terminal: v, integrals: sums.finish(params.t) })
}

/// Every grid value `V_0, V_h, ..., V_T` of one path; consumes the stream
/// exactly like [`simulate_variance`].
pub fn simulate_variance_path(params: &HestonParams, n_steps: u64, rng: &mut RngStream) -> Result<Vec<f64>> {
    level_of(n_steps)?;
    let step = SquareRootTransition::new(params.k, params.theta, params.sigma, params.t / n_steps as f64)?;
    let mut path = Vec::with_capacity(n_steps as usize + 1);
    let mut v = params.v0;
    path.push(v);
    for _ in 0..n_steps {
        v = step.sample(v, rng);
        path.push(v);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{ks_critical_value, ks_two_sample, SampleMoments};

    fn table1_cir_exact() -> HestonParams {
        HestonParams::new(2.8, 0.05, 0.25, 0.5, 1.0, 0.04, 1.0).unwrap()
    }

    fn transition_moments(p: &HestonParams, v_from: f64, dt: f64, n: usize, seed: u64) -> SampleMoments {
        let mut rng = RngStream::from_seed(seed);
        let xs: Vec<f64> = (0..n).map(|_| variance_transition(p, v_from, dt, &mut rng).unwrap()).collect();
        SampleMoments::from_slice(&xs)
    }

    #[test]
    fn transition_mean_unit_step() {
        let p = table1_cir_exact();
        let expected = p.theta + (p.v0 - p.theta) * (-p.k).exp();
        assert!((expected - 0.0493919).abs() < 1e-8);
        let m = transition_moments(&p, p.v0, 1.0, 1_000_000, 1);
        assert!((m.mean - expected).abs() <= 4.0 * m.se_mean, "mean {}", m.mean);
    }

    #[test]
    fn transition_from_zero() {
        let p = table1_cir_exact();
        let dt = 0.3;
        let expected = p.theta * (1.0 - (-p.k * dt).exp());
        let m = transition_moments(&p, 0.0, dt, 500_000, 2);
        assert!((m.mean - expected).abs() <= 4.0 * m.se_mean, "mean {}", m.mean);
    }

    #[test]
    fn transition_long_step_is_stationary() {
        let p = table1_cir_exact();
        let m = transition_moments(&p, p.v0, 50.0, 500_000, 3);
        assert!((m.mean - p.theta).abs() <= 4.0 * m.se_mean, "mean {}", m.mean);
    }

    #[test]
    fn transition_dof_matches_model() {
        let p = table1_cir_exact();
        let step = SquareRootTransition::new(p.k, p.theta, p.sigma, 0.25).unwrap();
        assert!((step.dof() - 8.96).abs() < 1e-12);
    }

    #[test]
    fn transition_rejects_bad_step() {
        let p = table1_cir_exact();
        let mut rng = RngStream::from_seed(0);
        assert!(variance_transition(&p, 0.04, 0.0, &mut rng).is_err());
        assert!(variance_transition(&p, 0.04, -1.0, &mut rng).is_err());
        assert!(variance_transition(&p, -0.01, 1.0, &mut rng).is_err());
    }

    #[test]
    fn single_step_integral_is_initial_rectangle() {
        let p = table1_cir_exact();
        let d = simulate_variance(&p, 1, &mut RngStream::from_seed(4)).unwrap();
        assert_eq!(d.fine_integral, p.v0 * p.t);
        assert_eq!(d.coarse_integral, d.fine_integral);
    }

    #[test]
    fn two_step_sums_match_path() {
        let p = table1_cir_exact();
        let d = simulate_variance(&p, 2, &mut RngStream::from_seed(5)).unwrap();
        let path = simulate_variance_path(&p, 2, &mut RngStream::from_seed(5)).unwrap();
        assert_eq!(d.fine_integral, (path[0] + path[1]) * 0.5);
        assert_eq!(d.coarse_integral, p.v0 * p.t);
        assert_eq!(d.v_terminal, path[2]);
    }

    #[test]
    fn coarse_sum_is_even_subsample() {
        let p = table1_cir_exact();
        for seed in 0..20 {
            let n = 64u64;
            let d = simulate_variance(&p, n, &mut RngStream::from_seed(seed)).unwrap();
            let path = simulate_variance_path(&p, n, &mut RngStream::from_seed(seed)).unwrap();
            let h = p.t / n as f64;
            let fine: f64 = path[..n as usize].iter().sum::<f64>() * h;
            let coarse: f64 = path[..n as usize].iter().step_by(2).sum::<f64>() * 2.0 * h;
            assert!((d.fine_integral - fine).abs() <= 1e-12 * fine);
            assert!((d.coarse_integral - coarse).abs() <= 1e-12 * coarse);
        }
    }

    #[test]
    fn rejects_non_dyadic_steps() {
        let p = table1_cir_exact();
        assert!(simulate_variance(&p, 3, &mut RngStream::from_seed(0)).is_err());
        assert!(simulate_variance(&p, 0, &mut RngStream::from_seed(0)).is_err());
    }

    #[test]
    fn fine_integral_mean() {
        let p = table1_cir_exact();
        let n = 128u64;
        let h = p.t / n as f64;
        let draws = 1_000_000;
        let mut rng = RngStream::from_seed(6);
        let xs: Vec<f64> = (0..draws)
            .map(|_| simulate_variance(&p, n, &mut rng).unwrap().fine_integral)
            .collect();
        let m = SampleMoments::from_slice(&xs);
        let mean_curve = |t: f64| p.theta + (p.v0 - p.theta) * (-p.k * t).exp();
        let integral = p.theta * p.t + (p.v0 - p.theta) * (1.0 - (-p.k * p.t).exp()) / p.k;
        assert!((integral - 0.0466458).abs() < 1e-7);
        let riemann: f64 = (0..n).map(|i| mean_curve(i as f64 * h) * h).sum();
        assert!((m.mean - riemann).abs() <= 4.0 * m.se_mean, "mean {} riemann {}", m.mean, riemann);
        let bias_bound = h * (mean_curve(p.t) - p.v0).abs();
        assert!((m.mean - integral).abs() <= 4.0 * m.se_mean + bias_bound);
    }

    #[test]
    fn paths_stay_nonnegative() {
        // Feller index far below one: zero is accessible.
        let low = HestonParams::new(0.5, 0.04, 1.0, 0.0, 1.0, 0.04, 1.0).unwrap();
        for p in [table1_cir_exact(), low] {
            let mut rng = RngStream::from_seed(7);
            for _ in 0..100_000 {
                let path = simulate_variance_path(&p, 16, &mut rng).unwrap();
                assert!(path.iter().all(|&v| v >= 0.0 && v.is_finite()));
            }
        }
    }

    #[test]
    fn chained_transitions_preserve_terminal_law() {
        let p = table1_cir_exact();
        let mut r1 = RngStream::from_seed(8);
        let mut r2 = RngStream::from_seed(9);
        let a: Vec<f64> = (0..100_000).map(|_| simulate_variance(&p, 1, &mut r1).unwrap().v_terminal).collect();
        let b: Vec<f64> = (0..100_000).map(|_| simulate_variance(&p, 64, &mut r2).unwrap().v_terminal).collect();
        let d = ks_two_sample(&a, &b);
        assert!(d < ks_critical_value(0.01, a.len(), b.len()), "ks {d}");
    }

    #[test]
    fn heston_validation() {
        assert!(HestonParams::new(0.0, 0.05, 0.25, 0.5, 1.0, 0.04, 1.0).is_err());
        assert!(HestonParams::new(2.8, 0.05, 0.25, 1.5, 1.0, 0.04, 1.0).is_err());
        assert!(HestonParams::new(2.8, 0.05, 0.25, -1.0, 1.0, 0.04, 1.0).is_ok());
        assert!((table1_cir_exact().feller_index() - 4.48).abs() < 1e-12);
    }
}

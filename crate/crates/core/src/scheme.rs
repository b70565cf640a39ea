//! Semi-exact log-Euler terminal log-price and coupled level draws.
//!
//! One simulation at `2^top` steps yields the variance and rate sums on every
//! coarser dyadic grid at once. Coarse levels reuse the same variance values,
//! the same rate randomness and the same terminal Gaussian, which is what
//! couples `Y_n` with `Y_{n-1}` (and with a fine reference level).

use crate::grid::check_level;
use crate::payoffs::DiscountedPayoff;
use crate::rates::{simulate_rate_levels, RateModel};
use crate::rng::PathStreams;
use crate::variance::{simulate_variance_levels, HestonParams};
use crate::{Error, Result};

/// Inputs of the terminal log-price on one grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalInputs {
    /// Left-endpoint sum of the short rate.
    pub rate_sum: f64,
    /// Left-endpoint sum of the variance; always > 0 since `V_0 > 0`.
    pub var_sum: f64,
    pub v_terminal: f64,
    /// Standard normal independent of the variance and rate paths.
    pub gaussian: f64,
}

/// Discounted payoffs of one sample on level `level` and `level - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledDraw {
    pub y_fine: f64,
    /// Zero on level 0.
    pub y_coarse: f64,
    pub level: u32,
}

impl CoupledDraw {
    pub fn delta(&self) -> f64 {
        self.y_fine - self.y_coarse
    }
}

/// `ln S0 + R + (rho k / sigma - 1/2) I + rho/sigma (V_T - V_0 - k theta T) + sqrt(1 - rho^2) sqrt(I) N`.
#[inline]
pub fn log_euler_terminal(p: &HestonParams, t: &TerminalInputs) -> f64 {
    p.s0.ln()
        + t.rate_sum
        + (p.rho * p.k / p.sigma - 0.5) * t.var_sum
        + p.rho / p.sigma * (t.v_terminal - p.v0 - p.k * p.theta * p.t)
        + (1.0 - p.rho * p.rho).sqrt() * t.var_sum.sqrt() * t.gaussian
}

/// Variance and rate sums of one sample on every level `0..=top_level`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSums {
    pub top_level: u32,
    pub var_integrals: Vec<f64>,
    pub rate_sums: Vec<f64>,
    pub v_terminal: f64,
    pub gaussian: f64,
}

impl PathSums {
    pub fn inputs(&self, level: u32) -> TerminalInputs {
        let l = level as usize;
        TerminalInputs {
            rate_sum: self.rate_sums[l],
            var_sum: self.var_integrals[l],
            v_terminal: self.v_terminal,
            gaussian: self.gaussian,
        }
    }
}

pub fn simulate_path_sums(
    p: &HestonParams,
    m: &RateModel,
    top_level: u32,
    streams: &mut PathStreams,
) -> Result<PathSums> {
    check_level(top_level)?;
    let var = simulate_variance_levels(p, top_level, &mut streams.variance)?;
    let rate = simulate_rate_levels(m, p.t, top_level, &mut streams.rate)?;
    Ok(PathSums {
        top_level,
        var_integrals: var.integrals,
        rate_sums: rate.sums,
        v_terminal: var.v_terminal,
        gaussian: streams.gaussian.standard_normal(),
    })
}

pub fn coupled_level_draw<P: DiscountedPayoff + ?Sized>(
    p: &HestonParams,
    m: &RateModel,
    payoff: &P,
    level: u32,
    streams: &mut PathStreams,
) -> Result<CoupledDraw> {
    payoff.check(p)?;
    let path = simulate_path_sums(p, m, level, streams)?;
    Ok(coupled_from_path(p, payoff, &path))
}

#[inline]
pub(crate) fn coupled_from_path<P: DiscountedPayoff + ?Sized>(p: &HestonParams, payoff: &P, path: &PathSums) -> CoupledDraw {
    let level = path.top_level;
    let y_fine = payoff.discounted(p, &path.inputs(level));
    let y_coarse = if level == 0 { 0.0 } else { payoff.discounted(p, &path.inputs(level - 1)) };
    CoupledDraw { y_fine, y_coarse, level }
}

/// Discounted payoffs on level `n_coarse` and on the reference level `n_ref`
/// of a single simulation at `2^n_ref` steps. Equal grids give equal values.
pub fn reference_pair_draw<P: DiscountedPayoff + ?Sized>(
    p: &HestonParams,
    m: &RateModel,
    payoff: &P,
    n_coarse: u32,
    n_ref: u32,
    streams: &mut PathStreams,
) -> Result<(f64, f64)> {
    if n_coarse > n_ref {
        return Err(Error::param(format!(
            "coarse level {n_coarse} must not exceed the reference level {n_ref}"
        )));
    }
    payoff.check(p)?;
    let path = simulate_path_sums(p, m, n_ref, streams)?;
    Ok((payoff.discounted(p, &path.inputs(n_coarse)), payoff.discounted(p, &path.inputs(n_ref))))
}

//! Short-rate models and their simulation on the dyadic grid.
//!
//! Exact transitions are available for CIR, Hull-White and Black-Karasinski.
//! CIR may instead be discretized with the backward Euler scheme on `sqrt(r)`
//! or the drift-implicit Milstein scheme; both keep the path nonnegative.
//! Coarse levels of a discretized path run their own recursion on summed
//! fine Brownian increments.

use serde::{Deserialize, Serialize};

use crate::grid::{check_level, level_of, DyadicSums};
use crate::rng::RngStream;
use crate::variance::SquareRootTransition;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CirScheme {
    #[default]
    Exact,
    Bem,
    #[serde(rename = "milstein", alias = "drift_implicit_milstein")]
    DriftImplicitMilstein,
}

/// Right-continuous step function on `[0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    starts: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn constant(value: f64) -> Self {
        Self { starts: vec![0.0], values: vec![value] }
    }

    /// Segments as `(start, value)`; the first must start at 0 and starts must increase.
    pub fn new(segments: &[(f64, f64)]) -> Result<Self> {
        let Some(&(first, _)) = segments.first() else {
            return Err(Error::param("a step function needs at least one segment"));
        };
        if first != 0.0 {
            return Err(Error::param(format!("first segment must start at 0, got {first}")));
        }
        if segments.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::param("segment starts must be strictly increasing"));
        }
        if segments.iter().any(|&(s, v)| !s.is_finite() || !v.is_finite()) {
            return Err(Error::param("segment starts and values must be finite"));
        }
        Ok(Self {
            starts: segments.iter().map(|s| s.0).collect(),
            values: segments.iter().map(|s| s.1).collect(),
        })
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.starts.iter().copied().zip(self.values.iter().copied())
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.starts.partition_point(|&s| s <= t);
        self.values[idx.saturating_sub(1)]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `int_{t0}^{t1} exp(-alpha (t1 - s)) f(s) ds`, evaluated segment by segment.
    pub fn exp_weighted_integral(&self, alpha: f64, t0: f64, t1: f64) -> f64 {
        if self.values.len() == 1 {
            return self.values[0] * -(-alpha * (t1 - t0)).exp_m1() / alpha;
        }
        let mut total = 0.0;
        for (j, &value) in self.values.iter().enumerate() {
            let a = self.starts[j].max(t0);
            let b = self.starts.get(j + 1).copied().unwrap_or(f64::INFINITY).min(t1);
            if b > a {
                total += value * (-alpha * (t1 - b)).exp() * -(-alpha * (b - a)).exp_m1() / alpha;
            }
        }
        total
    }
}

/// `dr = alpha (beta - r) dt + gamma sqrt(r) dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub r0: f64,
    pub scheme: CirScheme,
}

impl CirParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma), ("r0", self.r0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("rate.{name} must be > 0, got {v}")));
            }
        }
        if self.scheme == CirScheme::Bem && self.bem_offset() < 0.0 {
            return Err(Error::config(format!(
                "backward Euler needs beta - gamma^2/(4 alpha) >= 0, got {}",
                self.bem_offset()
            )));
        }
        Ok(())
    }

    pub fn dof(&self) -> f64 {
        4.0 * self.alpha * self.beta / (self.gamma * self.gamma)
    }

    /// `2 alpha beta / gamma^2`.
    pub fn feller_ratio(&self) -> f64 {
        2.0 * self.alpha * self.beta / (self.gamma * self.gamma)
    }

    /// `beta - gamma^2 / (4 alpha)`, the constant of the backward Euler quadratic.
    pub fn bem_offset(&self) -> f64 {
        self.beta - self.gamma * self.gamma / (4.0 * self.alpha)
    }

    pub fn conditional_mean(&self, r_from: f64, dt: f64) -> f64 {
        let decay = (-self.alpha * dt).exp();
        r_from * decay + self.beta * (1.0 - decay)
    }
}

/// `dr = alpha (beta(t) - r) dt + gamma dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct HullWhiteParams {
    pub alpha: f64,
    pub beta: PiecewiseConstant,
    pub gamma: f64,
    pub r0: f64,
}

impl HullWhiteParams {
    pub fn validate(&self) -> Result<()> {
        check_gaussian_block(self.alpha, &self.beta, self.gamma)?;
        if !self.r0.is_finite() {
            return Err(Error::param("rate.r0 must be finite"));
        }
        Ok(())
    }

    /// Mean and variance of `r(t_from + dt)` given `r(t_from)`.
    pub fn transition_moments(&self, r_from: f64, t_from: f64, dt: f64) -> (f64, f64) {
        let mean = (-self.alpha * dt).exp() * r_from
            + self.alpha * self.beta.exp_weighted_integral(self.alpha, t_from, t_from + dt);
        (mean, ou_variance(self.alpha, self.gamma, dt))
    }
}

/// `d ln r = (beta(t) - alpha ln r) dt + gamma dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlackKarasinskiParams {
    pub alpha: f64,
    pub beta: PiecewiseConstant,
    pub gamma: f64,
    pub r0: f64,
}

impl BlackKarasinskiParams {
    pub fn validate(&self) -> Result<()> {
        check_gaussian_block(self.alpha, &self.beta, self.gamma)?;
        if !(self.r0.is_finite() && self.r0 > 0.0) {
            return Err(Error::param(format!("rate.r0 must be > 0, got {}", self.r0)));
        }
        Ok(())
    }

    /// Mean and variance of `ln r(t_from + dt)` given `r(t_from)`.
    pub fn log_transition_moments(&self, r_from: f64, t_from: f64, dt: f64) -> (f64, f64) {
        let mean = (-self.alpha * dt).exp() * r_from.ln()
            + self.beta.exp_weighted_integral(self.alpha, t_from, t_from + dt);
        (mean, ou_variance(self.alpha, self.gamma, dt))
    }
}

fn check_gaussian_block(alpha: f64, beta: &PiecewiseConstant, gamma: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::param(format!("rate.alpha must be > 0, got {alpha}")));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::param(format!("rate.gamma must be >= 0, got {gamma}")));
    }
    if beta.min_value() < 0.0 {
        return Err(Error::param("rate.beta must be nonnegative"));
    }
    Ok(())
}

fn ou_variance(alpha: f64, gamma: f64, dt: f64) -> f64 {
    gamma * gamma * -(-2.0 * alpha * dt).exp_m1() / (2.0 * alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateModel {
    Cir(CirParams),
    HullWhite(HullWhiteParams),
    BlackKarasinski(BlackKarasinskiParams),
}

impl RateModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            RateModel::Cir(p) => p.validate(),
            RateModel::HullWhite(p) => p.validate(),
            RateModel::BlackKarasinski(p) => p.validate(),
        }
    }

    pub fn r0(&self) -> f64 {
        match self {
            RateModel::Cir(p) => p.r0,
            RateModel::HullWhite(p) => p.r0,
            RateModel::BlackKarasinski(p) => p.r0,
        }
    }

    /// Short name used in reports, e.g. `CIR-exact` or `HW`.
    pub fn label(&self) -> &'static str {
        match self {
            RateModel::Cir(p) => match p.scheme {
                CirScheme::Exact => "CIR-exact",
                CirScheme::Bem => "CIR-BEM",
                CirScheme::DriftImplicitMilstein => "CIR-Milstein",
            },
            RateModel::HullWhite(_) => "HW",
            RateModel::BlackKarasinski(_) => "BK",
        }
    }

    /// Whether coarse levels are subsamples of the fine path.
    pub fn is_exact(&self) -> bool {
        !matches!(self, RateModel::Cir(p) if p.scheme != CirScheme::Exact)
    }
}

pub fn cir_exact_transition(m: &CirParams, r_from: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
    if !(r_from.is_finite() && r_from >= 0.0) {
        return Err(Error::param(format!("CIR rate must be >= 0, got {r_from}")));
    }
    let step = SquareRootTransition::new(m.alpha, m.beta, m.gamma, dt)?;
    Ok(step.sample(r_from, rng))
}

/// One backward Euler step on `x = sqrt(r)`: the positive root of
/// `(1 + a h/2) x^2 - (x_prev + gamma/2 dW) x - (a h/2)(beta - gamma^2/(4a)) = 0`.
/// Returns `(x_next, r_next)`.
#[inline]
pub fn bem_step(m: &CirParams, x_prev: f64, dw: f64, h: f64) -> (f64, f64) {
    let a = 1.0 + 0.5 * m.alpha * h;
    let b = x_prev + 0.5 * m.gamma * dw;
    let c = 0.5 * m.alpha * h * m.bem_offset();
    let x = (b + (b * b + 4.0 * a * c).sqrt()) / (2.0 * a);
    (x, x * x)
}

/// One drift-implicit Milstein step. The numerator is formed as
/// `(sqrt(r) + gamma dW/2)^2 + (alpha beta - gamma^2/4) h`, which is
/// nonnegative whenever `alpha beta >= gamma^2 / 4`.
#[inline]
pub fn milstein_step(m: &CirParams, r_prev: f64, dw: f64, h: f64) -> Result<f64> {
    if !(r_prev >= 0.0) {
        return Err(Error::Invariant(format!("Milstein state went negative: {r_prev}")));
    }
    let root = r_prev.sqrt() + 0.5 * m.gamma * dw;
    let numer = root * root + (m.alpha * m.beta - 0.25 * m.gamma * m.gamma) * h;
    Ok(numer / (1.0 + m.alpha * h))
}

pub fn hw_transition(m: &HullWhiteParams, r_from: f64, t_from: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
    check_step(dt)?;
    let (mean, var) = m.transition_moments(r_from, t_from, dt);
    Ok(mean + var.sqrt() * rng.standard_normal())
}

pub fn bk_transition(
    m: &BlackKarasinskiParams,
    r_from: f64,
    t_from: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    check_step(dt)?;
    if !(r_from > 0.0) {
        return Err(Error::param(format!("Black-Karasinski rate must be > 0, got {r_from}")));
    }
    let (mean, var) = m.log_transition_moments(r_from, t_from, dt);
    Ok((mean + var.sqrt() * rng.standard_normal()).exp())
}

fn check_step(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param(format!("time step must be > 0, got {dt}")));
    }
    Ok(())
}

/// Discount sums at step `h` and `2h`, and the fine terminal rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDraw {
    pub fine_discount_sum: f64,
    /// Equal to `fine_discount_sum` for a single-step path.
    pub coarse_discount_sum: f64,
    pub r_terminal: f64,
}

/// Discount sums of one rate path on every level `0..=top`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSums {
    /// `sums[l]` is the left-endpoint sum at step `T / 2^l`.
    pub sums: Vec<f64>,
    /// Terminal rate of each level's path; all equal for exact models.
    pub terminal: Vec<f64>,
}

pub fn simulate_rate(m: &RateModel, horizon: f64, n_steps: u64, rng: &mut RngStream) -> Result<RateDraw> {
    let top = level_of(n_steps)?;
    let s = simulate_rate_levels(m, horizon, top, rng)?;
    let fine = s.sums[top as usize];
    Ok(RateDraw {
        fine_discount_sum: fine,
        coarse_discount_sum: if top == 0 { fine } else { s.sums[top as usize - 1] },
        r_terminal: s.terminal[top as usize],
    })
}

pub fn simulate_rate_levels(m: &RateModel, horizon: f64, top: u32, rng: &mut RngStream) -> Result<RateSums> {
    check_level(top)?;
    let n = 1u64 << top;
    let h = horizon / n as f64;
    let mut sums = DyadicSums::new(top);
    let terminal = match m {
        RateModel::Cir(p) if p.scheme != CirScheme::Exact => {
            let states = drive_discretized(p, horizon, top, rng, |_, _, _| Ok(()))?;
            return Ok(RateSums {
                sums: states.iter().map(|s| s.sum).collect(),
                terminal: states.iter().map(|s| s.rate).collect(),
            });
        }
        RateModel::Cir(p) => {
            let step = SquareRootTransition::new(p.alpha, p.beta, p.gamma, h)?;
            let mut r = p.r0;
            for i in 0..n {
                sums.push(i, r);
                r = step.sample(r, rng);
            }
            r
        }
        RateModel::HullWhite(p) => {
            let decay = (-p.alpha * h).exp();
            let sd = ou_variance(p.alpha, p.gamma, h).sqrt();
            let mut r = p.r0;
            for i in 0..n {
                sums.push(i, r);
                let t = i as f64 * h;
                let drift = p.alpha * p.beta.exp_weighted_integral(p.alpha, t, t + h);
                r = decay * r + drift + sd * rng.standard_normal();
            }
            r
        }
        RateModel::BlackKarasinski(p) => {
            let decay = (-p.alpha * h).exp();
            let sd = ou_variance(p.alpha, p.gamma, h).sqrt();
            let mut y = p.r0.ln();
            let mut r = p.r0;
            for i in 0..n {
                sums.push(i, r);
                let t = i as f64 * h;
                y = decay * y + p.beta.exp_weighted_integral(p.alpha, t, t + h) + sd * rng.standard_normal();
                r = y.exp();
            }
            r
        }
    };
    Ok(RateSums { sums: sums.finish(horizon), terminal: vec![terminal; top as usize + 1] })
}

/// Every fine grid value `r_0, r_h, ..., r_T`; consumes the stream exactly
/// like [`simulate_rate`].
pub fn simulate_rate_path(m: &RateModel, horizon: f64, n_steps: u64, rng: &mut RngStream) -> Result<Vec<f64>> {
    let top = level_of(n_steps)?;
    let mut path = Vec::with_capacity(n_steps as usize + 1);
    match m {
        RateModel::Cir(p) if p.scheme != CirScheme::Exact => {
            let states = drive_discretized(p, horizon, top, rng, |l, _, s| {
                if l == top {
                    path.push(s.rate);
                }
                Ok(())
            })?;
            path.push(states[top as usize].rate);
        }
        RateModel::Cir(p) => {
            let step = SquareRootTransition::new(p.alpha, p.beta, p.gamma, horizon / n_steps as f64)?;
            path.push(p.r0);
            for i in 0..n_steps as usize {
                path.push(step.sample(path[i], rng));
            }
        }
        RateModel::HullWhite(p) => {
            let h = horizon / n_steps as f64;
            path.push(p.r0);
            for i in 0..n_steps as usize {
                path.push(hw_transition(p, path[i], i as f64 * h, h, rng)?);
            }
        }
        RateModel::BlackKarasinski(p) => {
            let h = horizon / n_steps as f64;
            path.push(p.r0);
            for i in 0..n_steps as usize {
                path.push(bk_transition(p, path[i], i as f64 * h, h, rng)?);
            }
        }
    }
    Ok(path)
}

/// Pathwise strong error of a discretized CIR scheme: for each requested
/// level, `max_i |r_level(t_i) - r_ref(t_i)|` over the level's grid points
/// `t_1..t_n`, with both paths driven by the same fine Brownian increments.
pub fn discretized_max_errors(
    m: &CirParams,
    horizon: f64,
    levels: &[u32],
    ref_level: u32,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if m.scheme == CirScheme::Exact {
        return Err(Error::param("strong errors are defined for discretized schemes only"));
    }
    if let Some(&bad) = levels.iter().find(|&&l| l > ref_level) {
        return Err(Error::param(format!("level {bad} is finer than the reference level {ref_level}")));
    }
    let mut errors = vec![0.0f64; ref_level as usize + 1];
    let mut current = vec![0.0f64; ref_level as usize + 1];
    let lowest_at = |i: u64| ref_level - i.trailing_zeros().min(ref_level);
    let states = drive_discretized(m, horizon, ref_level, rng, |l, i, s| {
        current[l as usize] = s.rate;
        if l == ref_level && i > 0 {
            for lv in lowest_at(i)..ref_level {
                let e = (current[lv as usize] - current[ref_level as usize]).abs();
                errors[lv as usize] = errors[lv as usize].max(e);
            }
        }
        Ok(())
    })?;
    let r_ref = states[ref_level as usize].rate;
    for (lv, s) in states.iter().enumerate() {
        errors[lv] = errors[lv].max((s.rate - r_ref).abs());
    }
    Ok(levels.iter().map(|&l| errors[l as usize]).collect())
}

#[derive(Debug, Clone, Copy)]
struct LevelState {
    /// `sqrt(r)` for backward Euler, `r` for Milstein.
    state: f64,
    rate: f64,
    pending_dw: f64,
    sum: f64,
}


/// Runs the discretized recursion on every level `0..=top` from one stream
/// of fine increments `dW_i ~ N(0, h_top)`. Level `l` steps whenever
/// `2^(top - l)` fine increments have accumulated. `observe(level, i, state)`
/// sees each level's state at its grid points `i < 2^top` (fine indexing),
/// lowest level first. Returned sums are already weighted by the level step.
fn drive_discretized(
    p: &CirParams,
    horizon: f64,
    top: u32,
    rng: &mut RngStream,
    mut observe: impl FnMut(u32, u64, &LevelState) -> Result<()>,
) -> Result<Vec<LevelState>> {
    let n = 1u64 << top;
    let sd = (horizon / n as f64).sqrt();
    let start = match p.scheme {
        CirScheme::Bem => p.r0.sqrt(),
        _ => p.r0,
    };
    let mut states = vec![LevelState { state: start, rate: p.r0, pending_dw: 0.0, sum: 0.0 }; top as usize + 1];
    let steps: Vec<f64> = (0..=top).map(|l| horizon / (1u64 << l) as f64).collect();
    for i in 0..n {
        let lowest = top - i.trailing_zeros().min(top);
        for l in lowest..=top {
            let s = &mut states[l as usize];
            s.sum += s.rate;
            observe(l, i, s)?;
        }
        let dw = sd * rng.standard_normal();
        let stepping = top - (i + 1).trailing_zeros().min(top);
        for (l, s) in states.iter_mut().enumerate() {
            s.pending_dw += dw;
            if l as u32 >= stepping {
                let h = steps[l];
                (s.state, s.rate) = match p.scheme {
                    CirScheme::Bem => bem_step(p, s.state, s.pending_dw, h),
                    _ => {
                        let r = milstein_step(p, s.state, s.pending_dw, h)?;
                        (r, r)
                    }
                };
                s.pending_dw = 0.0;
            }
        }
    }
    for (l, s) in states.iter_mut().enumerate() {
        s.sum *= steps[l];
    }
    Ok(states)
}

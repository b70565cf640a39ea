//! European and digital payoffs.
//!
//! Digital payoffs are never evaluated through the indicator inside the
//! pricing pipeline. Conditional on the variance and rate paths the terminal
//! log-price is Gaussian, so the discounted digital is replaced by its exact
//! conditional expectation `exp(-R) * Phi(A)`, which is smooth in the path sums.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use crate::scheme::{log_euler_terminal, TerminalInputs};
use crate::variance::HestonParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payoff {
    Put { strike: f64 },
    Call { strike: f64 },
    DigitalCall { strike: f64 },
    DigitalPut { strike: f64 },
}

impl Payoff {
    pub fn strike(&self) -> f64 {
        match *self {
            Payoff::Put { strike }
            | Payoff::Call { strike }
            | Payoff::DigitalCall { strike }
            | Payoff::DigitalPut { strike } => strike,
        }
    }

    pub fn is_digital(&self) -> bool {
        matches!(self, Payoff::DigitalCall { .. } | Payoff::DigitalPut { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.strike();
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::param(format!("strike must be > 0, got {k}")));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Payoff::Put { .. } => "put",
            Payoff::Call { .. } => "call",
            Payoff::DigitalCall { .. } => "digital_call",
            Payoff::DigitalPut { .. } => "digital_put",
        }
    }
}

impl fmt::Display for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(K={})", self.name(), self.strike())
    }
}

/// Path sums the conditional digital value depends on; the terminal
/// Gaussian is integrated out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GInputs {
    pub v_terminal: f64,
    pub var_sum: f64,
    pub rate_sum: f64,
}

impl From<&TerminalInputs> for GInputs {
    fn from(t: &TerminalInputs) -> Self {
        Self { v_terminal: t.v_terminal, var_sum: t.var_sum, rate_sum: t.rate_sum }
    }
}

/// Undiscounted payoff at terminal spot `s`. Digitals return the indicator.
pub fn vanilla_value(payoff: &Payoff, s_terminal: f64) -> f64 {
    match *payoff {
        Payoff::Put { strike } => (strike - s_terminal).max(0.0),
        Payoff::Call { strike } => (s_terminal - strike).max(0.0),
        Payoff::DigitalCall { strike } => f64::from(u8::from(s_terminal > strike)),
        Payoff::DigitalPut { strike } => f64::from(u8::from(s_terminal < strike)),
    }
}

/// Standard normal cdf. Both tails are evaluated through `erfc` of a
/// nonnegative argument, so there is no cancellation for large `|x|`.
pub fn norm_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * libm::erfc(x * FRAC_1_SQRT_2)
    }
}

/// Standardized conditional log-moneyness `A`: `P(S_T > K | V, r) = Phi(A)`.
fn digital_argument(p: &HestonParams, strike: f64, g: &GInputs) -> f64 {
    let drift = (p.s0 / strike).ln()
        + g.rate_sum
        + (p.rho * p.k / p.sigma - 0.5) * g.var_sum
        + p.rho / p.sigma * (g.v_terminal - p.v0 - p.k * p.theta * p.t);
    drift / ((1.0 - p.rho * p.rho).sqrt() * g.var_sum.sqrt())
}

pub fn digital_conditional_value(p: &HestonParams, payoff: &Payoff, g: &GInputs) -> Result<f64> {
    if p.rho.abs() >= 1.0 {
        return Err(Error::Unsupported(
            "conditional digital value needs |rho| < 1; the conditional law is degenerate".into(),
        ));
    }
    if !(g.var_sum > 0.0) {
        return Err(Error::param(format!("variance sum must be > 0, got {}", g.var_sum)));
    }
    match *payoff {
        Payoff::DigitalCall { strike } => Ok(digital_unchecked(p, strike, g, true)),
        Payoff::DigitalPut { strike } => Ok(digital_unchecked(p, strike, g, false)),
        _ => Err(Error::param(format!("{payoff} is not a digital payoff"))),
    }
}

#[inline]
fn digital_unchecked(p: &HestonParams, strike: f64, g: &GInputs, call: bool) -> f64 {
    let a = digital_argument(p, strike, g);
    let prob = if call { norm_cdf(a) } else { norm_cdf(-a) };
    (-g.rate_sum).exp() * prob
}

/// `exp(-rate_sum) * P(S_T)` for vanilla payoffs; the conditional value for digitals.
#[inline]
pub fn discounted_payoff(p: &HestonParams, payoff: &Payoff, t: &TerminalInputs) -> f64 {
    match *payoff {
        Payoff::DigitalCall { strike } => digital_unchecked(p, strike, &t.into(), true),
        Payoff::DigitalPut { strike } => digital_unchecked(p, strike, &t.into(), false),
        _ => (-t.rate_sum).exp() * vanilla_value(payoff, log_euler_terminal(p, t).exp()),
    }
}

/// Discounted payoff functional consumed by the level draws and estimators.
pub trait DiscountedPayoff: Sync {
    fn discounted(&self, params: &HestonParams, inputs: &TerminalInputs) -> f64;

    /// Rejects parameter combinations for which `discounted` is undefined.
    fn check(&self, _params: &HestonParams) -> Result<()> {
        Ok(())
    }
}

impl DiscountedPayoff for Payoff {
    #[inline]
    fn discounted(&self, params: &HestonParams, inputs: &TerminalInputs) -> f64 {
        discounted_payoff(params, self, inputs)
    }

    fn check(&self, params: &HestonParams) -> Result<()> {
        self.validate()?;
        if self.is_digital() && params.rho.abs() >= 1.0 {
            return Err(Error::Unsupported(format!("{self} needs |rho| < 1")));
        }
        Ok(())
    }
}

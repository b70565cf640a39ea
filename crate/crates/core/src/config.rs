//! Experiment configuration documents and their validation.
//!
//! ```json
//! {
//!   "heston": {"k": 2.8, "theta": 0.05, "sigma": 0.25, "rho": 0.5, "s0": 1, "v0": 0.04, "t": 1},
//!   "rate": {"type": "cir", "alpha": 1.2, "beta": 0.06, "gamma": 0.25, "r0": 0.05, "scheme": "exact"},
//!   "experiment": {"levels": [2, 3, 4, 5, 6], "ref_level": 9, "samples": 200000, "seed": 1, "tail_exponent": 1.5},
//!   "payoffs": [{"type": "put", "strike": 1}],
//!   "output": "results.csv"
//! }
//! ```
//!
//! A time-dependent `beta` is given as `"beta_segments": [{"start": 0, "value": 0.05}, ...]`.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::estimators::LevelDistribution;
use crate::grid::MAX_LEVEL;
use crate::payoffs::Payoff;
use crate::rates::{BlackKarasinskiParams, CirParams, CirScheme, HullWhiteParams, PiecewiseConstant, RateModel};
use crate::variance::HestonParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    Cir,
    #[serde(alias = "hw")]
    HullWhite,
    #[serde(alias = "bk")]
    BlackKarasinski,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSegment {
    pub start: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    #[serde(rename = "type")]
    pub kind: RateKind,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_segments: Option<Vec<BetaSegment>>,
    pub gamma: f64,
    pub r0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<CirScheme>,
}

impl RateSpec {
    pub fn to_model(&self) -> Result<RateModel> {
        let beta = match (&self.beta, &self.beta_segments) {
            (Some(b), None) => PiecewiseConstant::constant(*b),
            (None, Some(segs)) => {
                let pairs: Vec<(f64, f64)> = segs.iter().map(|s| (s.start, s.value)).collect();
                PiecewiseConstant::new(&pairs).map_err(|e| Error::config(e.to_string()))?
            }
            (Some(_), Some(_)) => return Err(Error::config("give either rate.beta or rate.beta_segments, not both")),
            (None, None) => return Err(Error::config("rate.beta or rate.beta_segments is required")),
        };
        if self.kind != RateKind::Cir && self.scheme.is_some_and(|s| s != CirScheme::Exact) {
            return Err(Error::config("only the CIR model supports discretized schemes"));
        }
        Ok(match self.kind {
            RateKind::Cir => {
                if self.beta_segments.is_some() {
                    return Err(Error::config("the CIR model takes a constant rate.beta"));
                }
                RateModel::Cir(CirParams {
                    alpha: self.alpha,
                    beta: self.beta.unwrap_or_default(),
                    gamma: self.gamma,
                    r0: self.r0,
                    scheme: self.scheme.unwrap_or_default(),
                })
            }
            RateKind::HullWhite => {
                RateModel::HullWhite(HullWhiteParams { alpha: self.alpha, beta, gamma: self.gamma, r0: self.r0 })
            }
            RateKind::BlackKarasinski => RateModel::BlackKarasinski(BlackKarasinskiParams {
                alpha: self.alpha,
                beta,
                gamma: self.gamma,
                r0: self.r0,
            }),
        })
    }
}

fn default_levels() -> Vec<u32> {
    vec![2, 3, 4, 5, 6]
}
fn default_ref_level() -> u32 {
    9
}
fn default_samples() -> u64 {
    200_000
}
fn default_seed() -> u64 {
    1
}
fn default_tail_exponent() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_levels")]
    pub levels: Vec<u32>,
    #[serde(default = "default_ref_level")]
    pub ref_level: u32,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tail_exponent")]
    pub tail_exponent: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            levels: default_levels(),
            ref_level: default_ref_level(),
            samples: default_samples(),
            seed: default_seed(),
            tail_exponent: default_tail_exponent(),
        }
    }
}

/// The on-disk JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub heston: HestonParams,
    pub rate: RateSpec,
    #[serde(default)]
    pub experiment: ExperimentSpec,
    pub payoffs: Vec<Payoff>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// A parsed experiment. Field constraints are checked by [`validate_config`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub heston: HestonParams,
    pub rate: RateModel,
    pub payoffs: Vec<Payoff>,
    pub levels: Vec<u32>,
    pub ref_level: u32,
    pub samples: u64,
    pub seed: u64,
    pub tail_exponent: f64,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_document(doc: ConfigDocument) -> Result<Self> {
        Ok(Self {
            heston: doc.heston,
            rate: doc.rate.to_model()?,
            payoffs: doc.payoffs,
            levels: doc.experiment.levels,
            ref_level: doc.experiment.ref_level,
            samples: doc.experiment.samples,
            seed: doc.experiment.seed,
            tail_exponent: doc.experiment.tail_exponent,
            output_path: doc.output,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: ConfigDocument = serde_json::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn level_distribution(&self) -> LevelDistribution {
        LevelDistribution::Geometric { exponent: self.tail_exponent }
    }

    /// Parameter sets of the four benchmark configurations with put, call and
    /// digital call payoffs at `S0 = K = 1`, `T = 1`.
    pub fn benchmark(kind: Benchmark) -> Self {
        let heston = match kind {
            Benchmark::CirBem => HestonParams { k: 3.0, theta: 0.04, sigma: 0.25, rho: 0.5, s0: 1.0, v0: 0.04, t: 1.0 },
            _ => HestonParams { k: 2.8, theta: 0.05, sigma: 0.25, rho: 0.5, s0: 1.0, v0: 0.04, t: 1.0 },
        };
        let rate = match kind {
            Benchmark::CirExact => RateModel::Cir(CirParams {
                alpha: 1.2,
                beta: 0.06,
                gamma: 0.25,
                r0: 0.05,
                scheme: CirScheme::Exact,
            }),
            Benchmark::CirBem => RateModel::Cir(CirParams {
                alpha: 3.5,
                beta: 0.06,
                gamma: 0.25,
                r0: 0.05,
                scheme: CirScheme::Bem,
            }),
            Benchmark::HullWhite => RateModel::HullWhite(HullWhiteParams {
                alpha: 1.2,
                beta: PiecewiseConstant::constant(0.06),
                gamma: 0.5,
                r0: 0.05,
            }),
            Benchmark::BlackKarasinski => RateModel::BlackKarasinski(BlackKarasinskiParams {
                alpha: 1.2,
                beta: PiecewiseConstant::constant(0.06),
                gamma: 0.25,
                r0: 0.05,
            }),
        };
        let spec = ExperimentSpec::default();
        Self {
            heston,
            rate,
            payoffs: vec![
                Payoff::Put { strike: 1.0 },
                Payoff::Call { strike: 1.0 },
                Payoff::DigitalCall { strike: 1.0 },
            ],
            levels: spec.levels,
            ref_level: spec.ref_level,
            samples: spec.samples,
            seed: spec.seed,
            tail_exponent: spec.tail_exponent,
            output_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    CirExact,
    CirBem,
    HullWhite,
    BlackKarasinski,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] =
        [Benchmark::CirExact, Benchmark::CirBem, Benchmark::HullWhite, Benchmark::BlackKarasinski];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
}

impl Diagnostic {
    fn error(code: &'static str, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, code, message: message.into() }
    }

    fn warning(code: &'static str, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, code, message: message.into() }
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

pub fn validate_config(c: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if let Err(e) = c.heston.validate() {
        out.push(Diagnostic::error("heston", e.to_string()));
    }
    if let Err(e) = c.rate.validate() {
        let code = if matches!(e, Error::Config(_)) { "bem-root" } else { "rate" };
        out.push(Diagnostic::error(code, e.to_string()));
    }
    if c.payoffs.is_empty() {
        out.push(Diagnostic::error("payoffs", "at least one payoff is required"));
    }
    for payoff in &c.payoffs {
        if let Err(e) = payoff.validate() {
            out.push(Diagnostic::error("payoffs", e.to_string()));
        }
    }
    let digital = c.payoffs.iter().any(Payoff::is_digital);
    if digital && c.heston.rho.abs() >= 1.0 {
        out.push(Diagnostic::error(
            "digital-correlation",
            "digital payoffs need |rho| < 1: with perfect correlation the conditional law is degenerate",
        ));
    }
    if digital && c.heston.feller_index() <= 1.0 {
        out.push(Diagnostic::warning(
            "digital-feller",
            format!(
                "2k theta / sigma^2 = {:.4} <= 1: the second-order rate for digitals is not guaranteed",
                c.heston.feller_index()
            ),
        ));
    }
    if let RateModel::Cir(p) = &c.rate {
        match p.scheme {
            CirScheme::Bem if p.feller_ratio() <= 3.0 => out.push(Diagnostic::warning(
                "bem-order",
                format!("2 alpha beta / gamma^2 = {:.4} <= 3: first-order strong convergence is not guaranteed", p.feller_ratio()),
            )),
            CirScheme::DriftImplicitMilstein if p.alpha * p.beta < p.gamma * p.gamma / 4.0 => {
                out.push(Diagnostic::warning(
                    "milstein-positivity",
                    "alpha beta < gamma^2 / 4: the drift-implicit Milstein path may turn negative",
                ))
            }
            _ => {}
        }
    }
    if c.ref_level > MAX_LEVEL {
        out.push(Diagnostic::error("levels", format!("ref_level {} exceeds {MAX_LEVEL}", c.ref_level)));
    }
    if c.levels.is_empty() {
        out.push(Diagnostic::error("levels", "at least one level is required"));
    }
    for &n in &c.levels {
        if n > c.ref_level {
            out.push(Diagnostic::error("levels", format!("level {n} is finer than ref_level {}", c.ref_level)));
        } else if n == c.ref_level {
            out.push(Diagnostic::warning("levels", format!("level {n} equals ref_level; its error is identically zero")));
        }
    }
    if c.samples < 100 {
        out.push(Diagnostic::error("samples", format!("samples must be >= 100, got {}", c.samples)));
    }
    if !(c.tail_exponent.is_finite() && c.tail_exponent > 0.0) {
        out.push(Diagnostic::error("tail", format!("tail_exponent must be > 0, got {}", c.tail_exponent)));
    } else if c.tail_exponent <= 1.0 {
        out.push(Diagnostic::warning(
            "tail-work",
            format!("tail_exponent {} <= 1: the expected work per sample is infinite", c.tail_exponent),
        ));
    } else if c.tail_exponent >= 2.0 {
        out.push(Diagnostic::warning(
            "tail-variance",
            format!("tail_exponent {} >= 2: the coupled-sum variance is infinite for a second-order squared error", c.tail_exponent),
        ));
    }
    out
}

//! Unbiased Monte Carlo pricing for the Heston model with stochastic short rates.
//!
//! The variance process is sampled exactly through its noncentral chi-squared
//! transition law, the short rate through exact transitions (CIR, Hull-White,
//! Black-Karasinski) or positivity-preserving discretizations (backward Euler
//! on the square root, drift-implicit Milstein), and the terminal log-price is
//! assembled from left-endpoint Riemann sums of both processes plus a single
//! independent Gaussian. Dyadic levels are coupled and fed to the randomized
//! coupled-sum estimator, which removes the discretization bias.
//!
//! Module map:
//! - [`rng`]: counter-based, key-addressed random streams
//! - [`distributions`]: Poisson, gamma and noncentral chi-squared samplers
//! - [`variance`]: exact variance transitions and streamed integral sums
//! - [`rates`]: short-rate models and their simulation schemes
//! - [`scheme`]: terminal log-price and coupled level draws
//! - [`payoffs`]: vanilla payoffs and the conditional digital value
//! - [`estimators`]: fixed-level and coupled-sum estimators
//! - [`config`], [`harness`], [`diagnostics`]: experiment front end

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod distributions;
mod error;
pub mod estimators;
mod grid;
pub mod harness;
pub mod payoffs;
pub mod rates;
pub mod rng;
pub mod scheme;
pub mod variance;

pub use error::{Error, Result};

pub use distributions::{sample_gamma, sample_ncx2, sample_poisson, NcChiSqParams};
pub use estimators::{
    run_estimator, EstimatorKind, EstimatorReport, LevelDistribution, RunOptions,
};
pub use payoffs::{DiscountedPayoff, Payoff};
pub use rates::{CirScheme, RateModel};
pub use rng::{RngStream, Role, SampleSeed, StreamKey};
pub use scheme::{log_euler_terminal, CoupledDraw, TerminalInputs};
pub use variance::HestonParams;

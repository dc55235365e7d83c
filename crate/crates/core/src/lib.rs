//! Locally risk-minimizing and delta hedging of European calls under
//! exponential Lévy models.
//!
//! The crate computes, for a model `S = S_0 exp(L)`:
//!
//! - the minimal martingale measure (MMM) and its cumulant ([`levy_core`]),
//! - the Fourier building blocks `I1`, `I2` and tail probabilities ([`fourier`]),
//! - the LRM and delta strategies with the two error bounds ([`hedging`]),
//! - a Monte Carlo oracle under the MMM ([`oracle_mc`]),
//! - RMSE calibration to call quotes ([`calibration`]).
//!
//! Merton and variance-gamma models live in [`models`]; [`config`] holds the
//! TOML run configuration shared with the command-line tool.

pub mod calibration;
pub mod config;
pub mod error;
pub mod fourier;
pub mod hedging;
pub mod levy_core;
pub mod models;
pub mod oracle_mc;
pub mod quad;

pub use error::{Error, Result};
pub use levy_core::{c2_split, compute_mu_s, mmm_cumulant, to_mmm, LevyMeasure, LevyModel, MmmModel};

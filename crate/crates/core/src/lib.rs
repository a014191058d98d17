//! Tail asymptotics of `sup_{s ≤ T} X(Y(s))` for Gaussian `X` and `Y`,
//! with exact-path Monte Carlo to check them.
//!
//! - [`weibull`]: closed-form Weibullian tails.
//! - [`paths`]: exact Gaussian path samplers.
//! - [`mc_sup`]: crude and splitting estimators of the supremum tail.
//! - [`pickands`]: Pickands constants.
//! - [`tail_fit`]: fitting and testing tail parameters.
//! - [`long_time`]: limits over growing horizons.

pub mod cli;
pub mod error;
pub mod fixtures;
pub mod long_time;
pub mod mc_sup;
pub mod paths;
pub mod pickands;
pub mod selftest;
pub mod tail_fit;
pub mod weibull;

pub use error::{Error, Result};

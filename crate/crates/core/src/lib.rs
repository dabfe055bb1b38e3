//! Simulation and numerical analysis of Parisian ruin over a finite time
//! horizon.
//!
//! The crate has five parts:
//!
//! * [`paths`] — deterministic, seedable samplers for Brownian motion,
//!   fractional Brownian motion (circulant embedding) and general Gaussian
//!   covariances, including mean-shifted sampling for importance sampling;
//! * [`ruin`] — the sup-inf Parisian ruin functional on discretized paths
//!   and plain / importance-sampled Monte Carlo estimators, with
//!   step-halving discretization diagnostics;
//! * [`asymptotics`] — closed-form constants, expansions, bounds and
//!   log-rates, plus quadrature oracles that make them checkable;
//! * [`constants`] — Monte Carlo estimation of the sup-inf (Pickands-type)
//!   and penalized (Piterbarg-type) limiting constants;
//! * [`stable`] — alpha-stable path simulation and the matching Parisian
//!   estimator.
//!
//! All samplers derive one RNG stream per path index, so every estimate is
//! reproducible bit-for-bit for a given seed regardless of worker count.

pub mod asymptotics;
pub mod constants;
pub mod error;
pub mod gauss;
pub mod grid;
pub mod paths;
pub mod quad;
pub mod ruin;
pub mod stable;

pub use error::{Error, Result};

//! Monte Carlo upper and lower price bounds for VIX futures, caps, calls and puts
//! under a capped/floored CEV-Heston local-stochastic-volatility model.
//!
//! A single least-squares regression on simulated paths estimates both the
//! conditional expected realised variance at the VIX start date and the martingale
//! increments of its hedge. Plugged into dual representations of the square root,
//! these give a true upper bound and a true lower bound on an independent batch.
//! A nested Monte Carlo oracle serves as the reference price.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar to `f64`, which is what the command-line tool uses.

pub mod bounds;
pub mod config;
pub mod error;
pub mod experiment;
pub mod model;
pub mod oracle;
pub mod qr;
pub mod regress;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod stats;
pub mod table;

pub use error::{Error, Result};
pub use scalar::Real;

pub type LsvParams = model::LsvParams<f64>;
pub type TimeGrid = model::TimeGrid<f64>;
pub type PathBatch = simulate::PathBatch<f64>;
pub type RegressionFit = regress::RegressionFit<f64>;
pub type BoundEstimate = stats::BoundEstimate<f64>;
pub type DerivativeTable = table::DerivativeTable<f64>;
pub type PriceColumn = table::PriceColumn<f64>;

pub type LsvParams32 = model::LsvParams<f32>;
pub type PathBatch32 = simulate::PathBatch<f32>;

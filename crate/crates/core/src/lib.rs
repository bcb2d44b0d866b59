//! Channel-distribution-information (CDI) maps for ultra-reliable rate selection.
//!
//! The pipeline: synthesize (or load) wideband channel sweeps per location,
//! reduce each location to an order-statistic estimate of its log ε-quantile
//! gain, interpolate those quantiles with a Gaussian process, and pick a rate
//! at unseen locations from the δ-quantile of the predictive distribution.
//! [`evaluate`] runs the Monte Carlo campaign that measures how often the
//! selected rate violates the outage target.

pub mod cdimap;
pub mod channel;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod linalg;
pub mod rateselect;
pub mod rng;
pub mod scenario;
pub mod stats;

pub use error::{Error, Result};
pub use rng::RandomStream;

//! Rate selection: the CDI-map rule, the Rayleigh model-based baseline and the
//! genie that knows the test location's samples.

pub mod special;

use serde::{Deserialize, Serialize};

pub use special::{chi_square_quantile, erf, inverse_erf, normal_quantile};

use crate::cdimap::PredictiveQuantile;
use crate::channel::FadingSampleSet;
use crate::error::{Error, Result};
use crate::stats::{empirical_quantile_log, rate_for_gain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CdiMap,
    BaselineRayleigh,
    Genie,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::CdiMap, Method::BaselineRayleigh, Method::Genie];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::CdiMap => "cdi_map",
            Method::BaselineRayleigh => "baseline_rayleigh",
            Method::Genie => "genie",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a decision was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionInputs {
    Cdi { mu: f64, sigma2: f64, delta: f64 },
    Baseline { samples: usize, mean_snr_lower_bound: f64 },
    Genie { q_hat: f64, order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateDecision {
    /// bits/s/Hz
    pub rate: f64,
    pub method: Method,
    pub inputs: DecisionInputs,
}

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Domain(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

/// `log2(1 + γ_tx exp(μ + √2 σ erf⁻¹(2δ − 1)))`: the δ-quantile of the
/// Gaussian predictive distribution of the log ε-quantile, turned into a rate.
pub fn select_rate_cdi(pred: &PredictiveQuantile, gamma_tx: f64, delta: f64) -> Result<RateDecision> {
    check_unit_open("delta", delta)?;
    if !(pred.sigma2 >= 0.0) {
        return Err(Error::Domain(format!("predictive variance must be >= 0, got {}", pred.sigma2)));
    }
    let q = pred.mu + pred.sigma2.sqrt() * normal_quantile(delta)?;
    Ok(RateDecision {
        rate: rate_for_gain(gamma_tx, q.exp()),
        method: Method::CdiMap,
        inputs: DecisionInputs::Cdi { mu: pred.mu, sigma2: pred.sigma2, delta },
    })
}

/// A rate rule that only sees a handful of instantaneous SNRs at the test location.
pub trait BaselinePolicy: Sync {
    fn select(&self, snr_samples: &[f64], epsilon: f64, delta: f64) -> Result<RateDecision>;
}

/// Exact confidence bound for Rayleigh fading.
///
/// Exponential SNRs with mean `γ̄` give `2 Σ γ_i / γ̄ ~ χ²_{2M}`, so
/// `γ̄_lb = 2 Σ γ_i / Q_{χ²_{2M}}(1 − δ)` undershoots `γ̄` with probability
/// `1 − δ`. The rate is the ε-outage capacity of an exponential SNR with mean
/// `γ̄_lb`: `log2(1 + γ̄_lb (−ln(1 − ε)))`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RayleighChiSquare;

impl BaselinePolicy for RayleighChiSquare {
    fn select(&self, snr_samples: &[f64], epsilon: f64, delta: f64) -> Result<RateDecision> {
        check_unit_open("epsilon", epsilon)?;
        check_unit_open("delta", delta)?;
        if snr_samples.is_empty() {
            return Err(Error::Domain("baseline needs at least one SNR sample".into()));
        }
        if let Some(bad) = snr_samples.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Domain(format!("SNR samples must be positive, got {bad}")));
        }
        let m = snr_samples.len();
        let sum: f64 = snr_samples.iter().sum();
        let bound = 2.0 * sum / chi_square_quantile(1.0 - delta, 2.0 * m as f64)?;
        let eps_quantile = -(-epsilon).ln_1p();
        Ok(RateDecision {
            rate: rate_for_gain(bound, eps_quantile),
            method: Method::BaselineRayleigh,
            inputs: DecisionInputs::Baseline { samples: m, mean_snr_lower_bound: bound },
        })
    }
}

pub fn select_rate_baseline(snr_samples: &[f64], epsilon: f64, delta: f64) -> Result<RateDecision> {
    RayleighChiSquare.select(snr_samples, epsilon, delta)
}

/// ε-outage capacity of the location's own samples.
pub fn select_rate_genie(samples: &FadingSampleSet, epsilon: f64, gamma_tx: f64) -> Result<RateDecision> {
    let q = empirical_quantile_log(samples, epsilon)?;
    Ok(RateDecision {
        rate: rate_for_gain(gamma_tx, q.rho_r),
        method: Method::Genie,
        inputs: DecisionInputs::Genie { q_hat: q.q_hat, order: q.order },
    })
}

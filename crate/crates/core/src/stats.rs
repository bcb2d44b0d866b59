//! Order-statistic quantiles, empirical outage and ε-outage capacity.

use serde::{Deserialize, Serialize};

use crate::channel::FadingSampleSet;
use crate::error::{Error, Result};

/// Rate `log2(1 + γ_tx ρ)` supported by channel gain `ρ`.
pub fn rate_for_gain(gamma_tx: f64, rho: f64) -> f64 {
    (gamma_tx * rho).ln_1p() / std::f64::consts::LN_2
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

/// `r = ⌊N ε⌋`. A relative nudge of a few ulps absorbs decimal round-off such
/// as `100 × 0.29 = 28.999…`.
pub fn order_index(n: usize, epsilon: f64) -> Result<usize> {
    check_epsilon(epsilon)?;
    let r = (n as f64 * epsilon * (1.0 + 4.0 * f64::EPSILON)).floor() as usize;
    if r < 1 {
        return Err(Error::InsufficientSamples { n, epsilon });
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub epsilon: f64,
    /// `ln ρ_(r)`.
    pub q_hat: f64,
    /// Order index `r` (1-based).
    pub order: usize,
    /// The order statistic `ρ_(r)` itself.
    pub rho_r: f64,
}

/// ε-quantile of the log gain as the `⌊Nε⌋`-th smallest sample.
pub fn empirical_quantile_log(samples: &FadingSampleSet, epsilon: f64) -> Result<QuantileEstimate> {
    let r = order_index(samples.len(), epsilon)?;
    let mut buf = samples.rho().to_vec();
    let (_, rho_r, _) = buf.select_nth_unstable_by(r - 1, f64::total_cmp);
    let rho_r = *rho_r;
    Ok(QuantileEstimate {
        epsilon,
        q_hat: rho_r.ln(),
        order: r,
        rho_r,
    })
}

/// Fraction of samples in outage at rate `rate`, i.e. with `log2(1 + γ_tx ρ) ≤ rate`.
pub fn empirical_outage(samples: &FadingSampleSet, rate: f64, gamma_tx: f64) -> Result<f64> {
    if !(rate >= 0.0) {
        return Err(Error::Domain(format!("rate must be >= 0, got {rate}")));
    }
    let hits = samples.rho().iter().filter(|&&r| rate_for_gain(gamma_tx, r) <= rate).count();
    Ok(hits as f64 / samples.len() as f64)
}

/// Genie ε-outage capacity `log2(1 + γ_tx ρ_(r))` of a sample set.
///
/// Uses the order statistic directly rather than `exp(q̂)` so the capacity
/// maps back onto exactly that sample in [`empirical_outage`].
pub fn outage_capacity_empirical(samples: &FadingSampleSet, epsilon: f64, gamma_tx: f64) -> Result<f64> {
    let q = empirical_quantile_log(samples, epsilon)?;
    Ok(rate_for_gain(gamma_tx, q.rho_r))
}

/// Samples kept in ascending order for repeated outage queries.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedGains {
    sorted: Vec<f64>,
}

impl SortedGains {
    pub fn new(samples: &FadingSampleSet) -> Self {
        let mut sorted = samples.rho().to_vec();
        sorted.sort_by(f64::total_cmp);
        Self { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of samples in outage at `rate`.
    pub fn outage_count(&self, rate: f64, gamma_tx: f64) -> usize {
        self.sorted.partition_point(|&r| rate_for_gain(gamma_tx, r) <= rate)
    }

    pub fn order_statistic(&self, r: usize) -> f64 {
        self.sorted[r - 1]
    }

    /// Asymptotic variance of `q̂ = ln ρ_(r)`: `ε(1−ε) / (N f̂²)`, with `f̂` the
    /// density of `ln ρ` at the quantile from a symmetric finite difference of
    /// neighbouring order statistics (half-width `max(1, ⌊√r⌋)`).
    pub fn quantile_log_variance(&self, epsilon: f64) -> Result<f64> {
        let n = self.sorted.len();
        let r = order_index(n, epsilon)?;
        let h = ((r as f64).sqrt().floor() as usize).max(1);
        let lo = r.saturating_sub(h).max(1);
        let hi = (r + h).min(n);
        if hi == lo {
            return Ok(0.0);
        }
        let dz = self.order_statistic(hi).ln() - self.order_statistic(lo).ln();
        if dz <= 0.0 {
            return Ok(0.0);
        }
        let density = (hi - lo) as f64 / n as f64 / dz;
        Ok(epsilon * (1.0 - epsilon) / (n as f64 * density * density))
    }
}

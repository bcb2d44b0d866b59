//! Monte Carlo campaign: repeated train/test splits, rate selection at every
//! test location, outage evaluation on held-out samples, and aggregation.

mod campaign;

pub use campaign::{run_campaign, World};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cdimap::FitOptions;
use crate::error::{Error, Result};
use crate::rateselect::Method;
use crate::scenario::Location;

/// Repetitions of the full-scale campaign.
pub const FULL_SCALE_REPETITIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Training-set sizes, one campaign each.
    pub d_list: Vec<usize>,
    /// Repetitions per training-set size.
    pub repetitions: usize,
    /// Instantaneous SNRs available to the baseline at each test location.
    pub baseline_samples: usize,
    /// Linear transmit SNR `γ_tx`.
    pub gamma_tx: f64,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub include_genie: bool,
    #[serde(default)]
    pub fit: FitOptions,
}

fn default_true() -> bool {
    true
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            delta: 0.05,
            d_list: vec![10, 25, 50, 100],
            repetitions: 2000,
            baseline_samples: 10,
            gamma_tx: 1.0,
            seed: 0,
            include_genie: true,
            fit: FitOptions::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self, n_locations: usize, n_samples: usize) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.epsilon) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !unit(self.delta) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.d_list.is_empty() {
            return Err(Error::Config("d_list is empty".into()));
        }
        if let Some(d) = self.d_list.iter().find(|&&d| d == 0 || d >= n_locations) {
            return Err(Error::Config(format!("training size {d} must lie in [1, {n_locations})")));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        if self.baseline_samples == 0 || self.baseline_samples >= n_samples {
            return Err(Error::Config(format!(
                "baseline_samples must lie in [1, {n_samples}), got {}",
                self.baseline_samples
            )));
        }
        if !(self.gamma_tx > 0.0 && self.gamma_tx.is_finite()) {
            return Err(Error::Config(format!("gamma_tx must be positive, got {}", self.gamma_tx)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub d_train: usize,
    pub repetition: usize,
    pub location_id: usize,
    pub method: Method,
    /// bits/s/Hz
    pub rate: f64,
    /// Empirical outage on the held-out samples.
    pub p_out: f64,
    /// Genie ε-outage capacity at the location, bits/s/Hz.
    pub r_eps: f64,
    /// `None` when `r_eps` is zero.
    pub normalized_throughput: Option<f64>,
}

/// Fraction of records whose outage exceeds `epsilon` (strictly).
pub fn meta_probability(records: &[EvalRecord], epsilon: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Analysis("meta-probability of an empty record set".into()));
    }
    let above = records.iter().filter(|r| r.p_out > epsilon).count();
    Ok(above as f64 / records.len() as f64)
}

/// `R (1 − p_out) / (R_ε (1 − ε))`.
pub fn normalized_throughput(rate: f64, p_out: f64, r_eps: f64, epsilon: f64) -> Result<f64> {
    if !(r_eps > 0.0) {
        return Err(Error::Domain(format!("normalized throughput undefined for R_eps = {r_eps}")));
    }
    Ok(rate * (1.0 - p_out) / (r_eps * (1.0 - epsilon)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationMeta {
    pub location_id: usize,
    pub exceedances: usize,
    pub count: usize,
    pub probability: f64,
}

/// Per-location share of records with `p_out > epsilon`.
pub fn conditional_meta_by_location(records: &[EvalRecord], epsilon: f64) -> BTreeMap<usize, LocationMeta> {
    let mut map: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = map.entry(r.location_id).or_default();
        e.0 += usize::from(r.p_out > epsilon);
        e.1 += 1;
    }
    map.into_iter()
        .map(|(id, (exceedances, count))| {
            let m = LocationMeta { location_id: id, exceedances, count, probability: exceedances as f64 / count as f64 };
            (id, m)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
}

/// Empirical CDF of `p_out` at each grid value: share of records with `p_out ≤ p`.
pub fn outage_cdf_curve(records: &[EvalRecord], grid: &[f64]) -> Result<Vec<CurvePoint>> {
    let values: Vec<f64> = records.iter().map(|r| r.p_out).collect();
    empirical_cdf(&values, grid)
}

fn empirical_cdf(values: &[f64], grid: &[f64]) -> Result<Vec<CurvePoint>> {
    if values.is_empty() {
        return Err(Error::Analysis("empirical CDF of an empty set".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(grid
        .iter()
        .map(|&x| CurvePoint { x, y: sorted.partition_point(|&v| v <= x) as f64 / n })
        .collect())
}

/// Outage-probability grid: 0, log-spaced points from 1e-4 to 1, and `epsilon`.
pub fn default_outage_grid(epsilon: f64) -> Vec<f64> {
    let mut g: Vec<f64> = std::iter::once(0.0)
        .chain((0..=160).map(|i| 10f64.powf(-4.0 + i as f64 / 40.0)))
        .chain(std::iter::once(epsilon))
        .collect();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Normalized-throughput grid: 0 to 2 in steps of 0.01.
pub fn default_throughput_grid() -> Vec<f64> {
    (0..=200).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub d_train: usize,
    pub method: Method,
    pub records: usize,
    pub meta_probability: f64,
    /// Binomial standard error of `meta_probability`.
    pub meta_std_error: f64,
    /// `None` when every record was excluded.
    pub mean_normalized_throughput: Option<f64>,
    /// Records left out of the throughput mean because `R_eps` was zero.
    pub throughput_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureSummary {
    pub d_train: usize,
    pub failed: usize,
    pub total: usize,
    /// First few failure messages, `repetition: message`.
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub d_train: usize,
    pub method: Method,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationMetaSet {
    pub d_train: usize,
    pub method: Method,
    pub locations: Vec<LocationMeta>,
}

/// Everything a campaign produced. The derived fields are pure functions of
/// `records` (see [`EvalReport::from_records`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub n_locations: usize,
    pub n_samples: usize,
    pub summaries: Vec<MethodSummary>,
    pub failures: Vec<FailureSummary>,
    pub conditional_meta: Vec<LocationMetaSet>,
    pub outage_cdf: Vec<Curve>,
    pub throughput_cdf: Vec<Curve>,
    /// Locations of the world the campaign ran on.
    #[serde(default)]
    pub locations: Vec<Location>,
    /// Kept out of the structured report; exported as a flat table.
    #[serde(skip)]
    pub records: Vec<EvalRecord>,
}

impl EvalReport {
    pub fn from_records(
        config: EvalConfig,
        n_locations: usize,
        n_samples: usize,
        records: Vec<EvalRecord>,
        failures: Vec<FailureSummary>,
    ) -> Result<Self> {
        let mut groups: BTreeMap<(usize, Method), Vec<EvalRecord>> = BTreeMap::new();
        for r in &records {
            groups.entry((r.d_train, r.method)).or_default().push(*r);
        }
        let eps = config.epsilon;
        let outage_grid = default_outage_grid(eps);
        let tp_grid = default_throughput_grid();
        let mut summaries = Vec::new();
        let mut conditional_meta = Vec::new();
        let mut outage_cdf = Vec::new();
        let mut throughput_cdf = Vec::new();
        for (&(d_train, method), group) in &groups {
            let meta = meta_probability(group, eps)?;
            let n = group.len();
            let throughputs: Vec<f64> = group.iter().filter_map(|r| r.normalized_throughput).collect();
            let mean_tp = (!throughputs.is_empty()).then(|| throughputs.iter().sum::<f64>() / throughputs.len() as f64);
            summaries.push(MethodSummary {
                d_train,
                method,
                records: n,
                meta_probability: meta,
                meta_std_error: (meta * (1.0 - meta) / n as f64).sqrt(),
                mean_normalized_throughput: mean_tp,
                throughput_excluded: n - throughputs.len(),
            });
            conditional_meta.push(LocationMetaSet {
                d_train,
                method,
                locations: conditional_meta_by_location(group, eps).into_values().collect(),
            });
            outage_cdf.push(Curve { d_train, method, points: outage_cdf_curve(group, &outage_grid)? });
            if !throughputs.is_empty() {
                throughput_cdf.push(Curve { d_train, method, points: empirical_cdf(&throughputs, &tp_grid)? });
            }
        }
        Ok(Self {
            config,
            n_locations,
            n_samples,
            summaries,
            failures,
            conditional_meta,
            outage_cdf,
            throughput_cdf,
            locations: Vec::new(),
            records,
        })
    }

    pub fn summary(&self, d_train: usize, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.d_train == d_train && s.method == method)
    }

    pub fn records_for(&self, d_train: usize, method: Method) -> Vec<EvalRecord> {
        self.records
            .iter()
            .filter(|r| r.d_train == d_train && r.method == method)
            .copied()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(loc: usize, p_out: f64) -> EvalRecord {
        EvalRecord {
            d_train: 10,
            repetition: 0,
            location_id: loc,
            method: Method::CdiMap,
            rate: 1.0,
            p_out,
            r_eps: 1.0,
            normalized_throughput: Some(1.0 - p_out),
        }
    }

    #[test]
    fn meta_probability_examples() {
        assert_eq!(meta_probability(&[rec(0, 0.0), rec(1, 0.0)], 0.01).unwrap(), 0.0);
        let half = [rec(0, 0.02), rec(1, 0.005), rec(2, 0.5), rec(3, 0.01)];
        assert_eq!(meta_probability(&half, 0.01).unwrap(), 0.5);
        assert!(meta_probability(&[], 0.01).is_err());
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(normalized_throughput(2.5, 0.01, 2.5, 0.01).unwrap(), 1.0);
        assert_eq!(normalized_throughput(0.0, 0.3, 2.5, 0.01).unwrap(), 0.0);
        assert!(normalized_throughput(1.0, 0.0, 0.0, 0.01).is_err());
    }

    #[test]
    fn conditional_meta_pools_to_overall() {
        let rs = [rec(0, 0.02), rec(0, 0.0), rec(1, 0.5), rec(2, 0.0), rec(2, 0.0), rec(2, 0.03)];
        let m = conditional_meta_by_location(&rs, 0.01);
        assert_eq!(m[&0].probability, 0.5);
        assert_eq!(m[&1].probability, 1.0);
        let pooled: f64 = m.values().map(|v| v.probability * v.count as f64).sum::<f64>() / rs.len() as f64;
        assert!((pooled - meta_probability(&rs, 0.01).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn cdf_step_and_consistency() {
        let rs = vec![rec(0, 0.2); 5];
        let c = outage_cdf_curve(&rs, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(c.iter().map(|p| p.y).collect::<Vec<_>>(), vec![0.0, 1.0, 1.0]);
        let mixed = [rec(0, 0.01), rec(1, 0.011), rec(2, 0.0), rec(3, 0.5)];
        let grid = default_outage_grid(0.01);
        let c = outage_cdf_curve(&mixed, &grid).unwrap();
        let at_eps = c.iter().find(|p| p.x == 0.01).unwrap().y;
        assert_eq!(at_eps, 1.0 - meta_probability(&mixed, 0.01).unwrap());
        assert!(c.windows(2).all(|w| w[0].y <= w[1].y));
        assert_eq!(c.last().unwrap().y, 1.0);
    }

    #[test]
    fn config_validation() {
        let c = EvalConfig::default();
        assert!(c.validate(127, 8001).is_ok());
        assert!(c.validate(100, 8001).is_err());
        assert!(EvalConfig { epsilon: 1.0, ..c.clone() }.validate(127, 8001).is_err());
        assert!(EvalConfig { repetitions: 0, ..c.clone() }.validate(127, 8001).is_err());
        assert!(EvalConfig { baseline_samples: 8001, ..c }.validate(127, 8001).is_err());
    }
}

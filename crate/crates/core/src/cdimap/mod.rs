//! CDI map: a Gaussian process over per-location log ε-quantile estimates.
//!
//! Model: `q(x) = m + f(x) + e(x)` with constant mean `m`, a stationary field
//! `f` with covariance `σ² ρ(‖x − x'‖ / ℓ)` and an i.i.d. nugget `e ~ N(0, σ_n²)`
//! that absorbs both micro-scale variation and the sampling noise of the
//! order-statistic estimates. The predictive distribution at a new location
//! is the usual Gaussian conditional of `q(x)` on the training values.

mod fit;

pub use fit::{fit_hyperparameters, fit_hyperparameters_with, FitOptions, ParameterBox};

use serde::{Deserialize, Serialize};

use crate::channel::FadingSampleSet;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::scenario::{distance, Location};
use crate::stats::{empirical_quantile_log, SortedGains};

/// Correlation family `ρ(r)` of the spatial kernel, `r = d / ℓ`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `e^{−r}` (Matérn ν = ½)
    #[default]
    Exponential,
    /// `(1 + √3 r) e^{−√3 r}`
    Matern32,
    /// `e^{−r²/2}`
    SquaredExponential,
}

impl KernelFamily {
    #[inline]
    pub fn correlation(&self, r: f64) -> f64 {
        match self {
            KernelFamily::Exponential => (-r).exp(),
            KernelFamily::Matern32 => {
                let s = 3f64.sqrt() * r;
                (1.0 + s) * (-s).exp()
            }
            KernelFamily::SquaredExponential => (-0.5 * r * r).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparameters {
    /// Constant mean, log-gain.
    pub mean_const: f64,
    /// log-gain²
    pub signal_variance: f64,
    /// meters
    pub length_scale: f64,
    /// log-gain²
    pub noise_variance: f64,
    #[serde(default)]
    pub kernel: KernelFamily,
}

impl GpHyperparameters {
    pub fn new(mean_const: f64, signal_variance: f64, length_scale: f64, noise_variance: f64) -> Self {
        Self {
            mean_const,
            signal_variance,
            length_scale,
            noise_variance,
            kernel: KernelFamily::Exponential,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mean_const.is_finite()
            && self.signal_variance >= 0.0
            && self.signal_variance.is_finite()
            && self.length_scale > 0.0
            && self.length_scale.is_finite()
            && self.noise_variance >= 0.0
            && self.noise_variance.is_finite();
        if !ok {
            return Err(Error::Config(format!("invalid GP hyperparameters {self:?}")));
        }
        Ok(())
    }
}

/// Covariance of the latent field between two locations.
pub fn kernel_eval(hp: &GpHyperparameters, a: &Location, b: &Location) -> f64 {
    kernel_at_distance(hp, distance(a, b))
}

#[inline]
fn kernel_at_distance(hp: &GpHyperparameters, d: f64) -> f64 {
    hp.signal_variance * hp.kernel.correlation(d / hp.length_scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEntry {
    pub location: Location,
    /// `ln ρ_(r)` at this location.
    pub q_hat: f64,
    /// Asymptotic variance of `q_hat`; 0 when unknown.
    pub sampling_variance: f64,
}

/// Training set of a CDI map: one log-quantile estimate per distinct location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileDataset {
    entries: Vec<QuantileEntry>,
    epsilon: f64,
    n_samples: usize,
}

impl QuantileDataset {
    pub fn new(entries: Vec<QuantileEntry>, epsilon: f64, n_samples: usize) -> Result<Self> {
        let mut ids: Vec<usize> = entries.iter().map(|e| e.location.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("quantile dataset has repeated location ids".into()));
        }
        if let Some(e) = entries
            .iter()
            .find(|e| !(e.q_hat.is_finite() && e.location.is_finite() && e.sampling_variance >= 0.0))
        {
            return Err(Error::Config(format!("invalid quantile entry at location {}", e.location.id)));
        }
        Ok(Self { entries, epsilon, n_samples })
    }

    /// Reduces every location's samples to its log ε-quantile estimate.
    pub fn from_samples(locations: &[Location], samples: &[FadingSampleSet], epsilon: f64) -> Result<Self> {
        if locations.len() != samples.len() {
            return Err(Error::Config("one sample set per location required".into()));
        }
        let n = samples.first().map_or(0, |s| s.len());
        if samples.iter().any(|s| s.len() != n) {
            return Err(Error::Config("all locations must have the same number of samples".into()));
        }
        let entries = locations
            .iter()
            .zip(samples)
            .map(|(loc, s)| {
                let q = empirical_quantile_log(s, epsilon)?;
                Ok(QuantileEntry {
                    location: *loc,
                    q_hat: q.q_hat,
                    sampling_variance: SortedGains::new(s).quantile_log_variance(epsilon)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries, epsilon, n)
    }

    pub fn entries(&self) -> &[QuantileEntry] {
        &self.entries
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries ordered by location id, so results do not depend on input order.
    pub fn canonical(&self) -> Self {
        let mut entries = self.entries.clone();
        entries.sort_by_key(|e| e.location.id);
        Self { entries, ..self.clone() }
    }

    pub fn mean_sampling_variance(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.entries.iter().map(|e| e.sampling_variance).sum::<f64>() / self.entries.len() as f64
    }

    fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.q_hat).collect()
    }

    fn distance_matrix(&self) -> Vec<f64> {
        let n = self.entries.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let v = distance(&self.entries[i].location, &self.entries[j].location);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        d
    }
}

/// Gaussian predictive distribution of the log ε-quantile at one location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveQuantile {
    pub mu: f64,
    pub sigma2: f64,
}

fn gram_matrix(dist: &[f64], n: usize, hp: &GpHyperparameters) -> Vec<f64> {
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = kernel_at_distance(hp, dist[i * n + j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] = hp.signal_variance + hp.noise_variance;
    }
    k
}

fn factor_gram(dist: &[f64], n: usize, hp: &GpHyperparameters) -> Result<Cholesky> {
    Cholesky::factor_with_jitter(&gram_matrix(dist, n, hp), n)
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `−½ rᵀ(K + σ_n² I)⁻¹ r − ½ log det(K + σ_n² I) − (D/2) log 2π`, `r = y − m`.
pub fn log_marginal_likelihood(data: &QuantileDataset, hp: &GpHyperparameters) -> Result<f64> {
    hp.validate()?;
    let n = data.len();
    if n == 0 {
        return Err(Error::InsufficientData { got: 0, need: 1 });
    }
    let chol = factor_gram(&data.distance_matrix(), n, hp)?;
    let mut r: Vec<f64> = data.values().iter().map(|y| y - hp.mean_const).collect();
    chol.forward_in_place(&mut r);
    let quad: f64 = r.iter().map(|v| v * v).sum();
    Ok(-0.5 * quad - 0.5 * chol.log_det() - 0.5 * n as f64 * LN_2PI)
}

/// A conditioned GP ready for repeated predictions.
#[derive(Debug, Clone)]
pub struct CdiMap {
    data: QuantileDataset,
    hp: GpHyperparameters,
    chol: Cholesky,
    /// `(K + σ_n² I)⁻¹ (y − m)`
    weights: Vec<f64>,
}

impl CdiMap {
    pub fn new(data: &QuantileDataset, hp: GpHyperparameters) -> Result<Self> {
        hp.validate()?;
        if data.is_empty() {
            return Err(Error::InsufficientData { got: 0, need: 1 });
        }
        let data = data.canonical();
        let n = data.len();
        let chol = factor_gram(&data.distance_matrix(), n, &hp)?;
        let centered: Vec<f64> = data.values().iter().map(|y| y - hp.mean_const).collect();
        let weights = chol.solve(&centered);
        Ok(Self { data, hp, chol, weights })
    }

    /// Fits hyperparameters by maximum marginal likelihood, then conditions.
    pub fn fit(data: &QuantileDataset, options: &FitOptions) -> Result<Self> {
        let hp = fit_hyperparameters_with(data, options)?;
        Self::new(data, hp)
    }

    pub fn hyperparameters(&self) -> &GpHyperparameters {
        &self.hp
    }

    pub fn data(&self) -> &QuantileDataset {
        &self.data
    }

    pub fn predict(&self, x: &Location) -> Result<PredictiveQuantile> {
        let hp = &self.hp;
        let k_star: Vec<f64> = self
            .data
            .entries
            .iter()
            .map(|e| kernel_eval(hp, &e.location, x))
            .collect();
        let mu = hp.mean_const + k_star.iter().zip(&self.weights).map(|(k, w)| k * w).sum::<f64>();
        let mut v = k_star;
        self.chol.forward_in_place(&mut v);
        let prior = hp.signal_variance + hp.noise_variance;
        let sigma2 = prior - v.iter().map(|a| a * a).sum::<f64>();
        let sigma2 = if sigma2 >= 0.0 {
            sigma2
        } else if sigma2 > -1e-10 * prior.max(1.0) {
            log::warn!("predictive variance {sigma2:e} clamped to 0 at location {}", x.id);
            0.0
        } else {
            return Err(Error::Numerical {
                message: format!("negative predictive variance {sigma2:e} at location {}", x.id),
                condition_estimate: self.chol.condition_estimate(),
            });
        };
        Ok(PredictiveQuantile { mu, sigma2 })
    }
}

/// One-shot prediction at `x` given data and hyperparameters.
pub fn predict(data: &QuantileDataset, hp: &GpHyperparameters, x: &Location) -> Result<PredictiveQuantile> {
    CdiMap::new(data, *hp)?.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loc(id: usize, x: f64, y: f64) -> Location {
        Location::new(id, x, y, 0.0)
    }

    fn entry(id: usize, x: f64, y: f64, q: f64) -> QuantileEntry {
        QuantileEntry { location: loc(id, x, y), q_hat: q, sampling_variance: 0.0 }
    }

    #[test]
    fn kernel_examples() {
        let hp = GpHyperparameters::new(0.0, 3.0, 10.0, 0.1);
        let a = loc(0, 0.0, 0.0);
        assert_eq!(kernel_eval(&hp, &a, &a), 3.0);
        assert!((kernel_eval(&hp, &a, &loc(1, 6.0, 8.0)) - 3.0 * (-1.0f64).exp()).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for d in [1.0, 10.0, 100.0, 1e3, 1e4] {
            let k = kernel_eval(&hp, &a, &loc(1, d, 0.0));
            assert!(k < prev);
            prev = k;
        }
        assert!(prev < 1e-300);
    }

    #[test]
    fn lml_single_point_closed_form() {
        let hp = GpHyperparameters::new(-4.0, 2.0, 5.0, 0.3);
        let data = QuantileDataset::new(vec![entry(0, 1.0, 1.0, -4.0)], 0.01, 8001).unwrap();
        let l = log_marginal_likelihood(&data, &hp).unwrap();
        assert!((l + 0.5 * (2.0 * std::f64::consts::PI * 2.3).ln()).abs() < 1e-12);
    }

    #[test]
    fn duplicate_entry_obeys_chain_rule() {
        // log p(y, y_dup) = log p(y) + log N(y_dup; μ*, σ*²) at the duplicated location
        let hp = GpHyperparameters::new(-1.0, 1.5, 7.0, 0.2);
        let base = vec![entry(0, 0.0, 0.0, -0.3), entry(1, 4.0, 1.0, -1.7), entry(2, 9.0, -2.0, -0.9)];
        let d3 = QuantileDataset::new(base.clone(), 0.01, 100).unwrap();
        let dup = QuantileEntry { location: loc(3, 4.0, 1.0), ..base[1] };
        let mut aug = base.clone();
        aug.push(dup);
        let d4 = QuantileDataset::new(aug, 0.01, 100).unwrap();
        let p = predict(&d3, &hp, &dup.location).unwrap();
        let cond = -0.5 * ((dup.q_hat - p.mu).powi(2) / p.sigma2 + (2.0 * std::f64::consts::PI * p.sigma2).ln());
        let l3 = log_marginal_likelihood(&d3, &hp).unwrap();
        let l4 = log_marginal_likelihood(&d4, &hp).unwrap();
        assert!((l4 - (l3 + cond)).abs() < 1e-10);
    }

    #[test]
    fn repeated_ids_rejected() {
        assert!(QuantileDataset::new(vec![entry(0, 0.0, 0.0, 1.0), entry(0, 1.0, 0.0, 1.0)], 0.01, 10).is_err());
    }

    #[test]
    fn interpolates_at_training_location() {
        let hp = GpHyperparameters::new(-2.0, 4.0, 20.0, 1e-9);
        let data = QuantileDataset::new(
            vec![entry(0, 0.0, 0.0, -1.0), entry(1, 5.0, 0.0, -3.5), entry(2, 2.5, 4.33, -2.2)],
            0.01,
            8001,
        )
        .unwrap();
        let p = predict(&data, &hp, &loc(7, 5.0, 0.0)).unwrap();
        assert!((p.mu + 3.5).abs() < 1e-6);
        assert!(p.sigma2 < 1e-6);
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let hp = GpHyperparameters::new(-2.0, 4.0, 5.0, 0.1);
        let data = QuantileDataset::new(vec![entry(0, 0.0, 0.0, 3.0), entry(1, 5.0, 0.0, 1.0)], 0.01, 8001).unwrap();
        let p = predict(&data, &hp, &loc(9, 1e4, 1e4)).unwrap();
        assert!((p.mu + 2.0).abs() < 1e-9);
        assert!((p.sigma2 - 4.1).abs() < 1e-9);
    }

    #[test]
    fn prediction_independent_of_entry_order() {
        let hp = GpHyperparameters::new(0.5, 1.0, 3.0, 0.05);
        let e = vec![entry(0, 0.0, 0.0, 1.0), entry(1, 2.0, 0.0, 0.2), entry(2, 0.0, 3.0, -0.4)];
        let mut r = e.clone();
        r.reverse();
        let x = loc(5, 1.0, 1.0);
        let a = predict(&QuantileDataset::new(e, 0.01, 10).unwrap(), &hp, &x).unwrap();
        let b = predict(&QuantileDataset::new(r, 0.01, 10).unwrap(), &hp, &x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        let data = QuantileDataset::new(vec![entry(0, 0.0, 0.0, 1.0)], 0.01, 10).unwrap();
        let hp = GpHyperparameters::new(0.0, 1.0, 0.0, 0.1);
        assert!(log_marginal_likelihood(&data, &hp).is_err());
        assert!(CdiMap::new(&data, hp).is_err());
    }

    #[test]
    fn from_samples_reduces_each_location() {
        let locs = [loc(0, 0.0, 0.0), loc(1, 5.0, 0.0)];
        let sets = [
            FadingSampleSet::new(0, (1..=100).map(|k| k as f64).collect()).unwrap(),
            FadingSampleSet::new(1, (1..=100).map(|k| 2.0 * k as f64).collect()).unwrap(),
        ];
        let d = QuantileDataset::from_samples(&locs, &sets, 0.05).unwrap();
        assert!((d.entries()[0].q_hat - 5f64.ln()).abs() < 1e-12);
        assert!((d.entries()[1].q_hat - 10f64.ln()).abs() < 1e-12);
        assert!(d.entries()[0].sampling_variance > 0.0);
        assert_eq!(d.n_samples(), 100);
    }
}

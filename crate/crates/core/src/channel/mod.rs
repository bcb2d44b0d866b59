//! Synthetic multipath channels, wideband sweeps and their validation metrics.
//!
//! A location's channel is a tapped-delay line `h(f) = Σ α_k exp(−2πj f τ_k)`
//! with coefficients that do not depend on frequency. Sweeping `f` over a wide
//! band and taking `|h(f)|²` at every point gives the narrowband fading
//! samples used by the rest of the pipeline.

mod analysis;
mod sweep;
mod synth;

pub use analysis::{
    coherence_bandwidth, fading_samples_from_cfr, fit_pathloss_exponent, free_space_loss,
    validate_sweep, PathlossFit, SweepValidation, DEFAULT_PEAK_THRESHOLD_DB,
};
pub use sweep::{cfr_from_cir, cfr_from_profile, cir_from_cfr};
pub use synth::{
    frequency_sampling_ratio, synth_multipath, synthesize_profiles, synthesize_sweeps,
    EnvironmentSpec, FieldCorrelation, FieldSpec, LargeScaleFields, SiteParams, MIN_SAMPLING_RATIO,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub coefficient: Complex64,
    /// Seconds.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultipathProfile {
    paths: Vec<Path>,
}

impl MultipathProfile {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Config("multipath profile needs at least one path".into()));
        }
        for (k, p) in paths.iter().enumerate() {
            if !(p.delay > 0.0 && p.delay.is_finite()) {
                return Err(Error::Config(format!("path {k}: delay must be positive, got {}", p.delay)));
            }
            if !(p.coefficient.re.is_finite() && p.coefficient.im.is_finite()) {
                return Err(Error::Config(format!("path {k}: coefficient is not finite")));
            }
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Paths of both profiles in one tapped-delay line.
    pub fn concat(&self, other: &MultipathProfile) -> MultipathProfile {
        let mut paths = self.paths.clone();
        paths.extend_from_slice(&other.paths);
        MultipathProfile { paths }
    }

    /// `Σ |α_k|`, an upper bound on `|h(f)|`.
    pub fn total_amplitude(&self) -> f64 {
        self.paths.iter().map(|p| p.coefficient.norm()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    f_min: f64,
    f_max: f64,
    n_points: usize,
}

impl FrequencyGrid {
    pub fn new(f_min: f64, f_max: f64, n_points: usize) -> Result<Self> {
        if !(f_min > 0.0 && f_max > f_min && f_max.is_finite()) {
            return Err(Error::Config(format!(
                "frequency grid needs 0 < f_min < f_max, got [{f_min}, {f_max}]"
            )));
        }
        if n_points < 2 {
            return Err(Error::Config(format!("frequency grid needs >= 2 points, got {n_points}")));
        }
        Ok(Self { f_min, f_max, n_points })
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn span(&self) -> f64 {
        self.f_max - self.f_min
    }

    pub fn step(&self) -> f64 {
        self.span() / (self.n_points - 1) as f64
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.f_min + self.f_max)
    }

    pub fn frequency(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.f_max
        } else {
            self.f_min + self.span() * i as f64 / (self.n_points - 1) as f64
        }
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.frequency(i))
    }
}

/// Complex channel frequency response over a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CfrSweep {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
}

impl CfrSweep {
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Format(format!(
                "sweep has {} values but the grid has {} points",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// Channel impulse response: inverse DFT of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    /// Seconds between taps.
    delay_step: f64,
    taps: Vec<Complex64>,
    grid: FrequencyGrid,
}

impl Cir {
    pub fn delay_step(&self) -> f64 {
        self.delay_step
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Frequency grid of the sweep this response came from.
    pub fn source_grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn delay(&self, i: usize) -> f64 {
        i as f64 * self.delay_step
    }

    pub fn delays(&self) -> Vec<f64> {
        (0..self.taps.len()).map(|i| self.delay(i)).collect()
    }

    /// Tap powers `20 log10 |h|` in dB.
    pub fn powers_db(&self) -> Vec<f64> {
        self.taps.iter().map(|h| 20.0 * h.norm().log10()).collect()
    }

    /// Index of the strongest tap.
    pub fn peak_index(&self) -> usize {
        self.taps
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, bv), (i, h)| {
                let v = h.norm_sqr();
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            })
            .0
    }
}

/// Narrowband channel gains `ρ = |h|²` observed at one location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingSampleSet {
    location_id: usize,
    rho: Vec<f64>,
}

impl FadingSampleSet {
    pub fn new(location_id: usize, rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::Analysis(format!("location {location_id}: empty sample set")));
        }
        if let Some((i, v)) = rho.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Analysis(format!(
                "location {location_id}: gain sample {i} is {v}, gains must be positive and finite"
            )));
        }
        Ok(Self { location_id, rho })
    }

    pub fn location_id(&self) -> usize {
        self.location_id
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.rho.iter().sum::<f64>() / self.rho.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_exact() {
        let g = FrequencyGrid::new(2e9, 10e9, 8001).unwrap();
        assert_eq!(g.frequency(0), 2e9);
        assert_eq!(g.frequency(8000), 10e9);
        assert_eq!(g.step(), 1e6);
        assert_eq!(g.center(), 6e9);
    }

    #[test]
    fn invalid_grids() {
        assert!(FrequencyGrid::new(0.0, 1e9, 10).is_err());
        assert!(FrequencyGrid::new(2e9, 1e9, 10).is_err());
        assert!(FrequencyGrid::new(1e9, 2e9, 1).is_err());
    }

    #[test]
    fn profile_invariants() {
        assert!(MultipathProfile::new(vec![]).is_err());
        let bad = Path { coefficient: Complex64::new(1.0, 0.0), delay: 0.0 };
        assert!(MultipathProfile::new(vec![bad]).is_err());
        let nan = Path { coefficient: Complex64::new(f64::NAN, 0.0), delay: 1e-9 };
        assert!(MultipathProfile::new(vec![nan]).is_err());
    }

    #[test]
    fn sample_set_rejects_nonpositive() {
        assert!(FadingSampleSet::new(0, vec![]).is_err());
        assert!(FadingSampleSet::new(0, vec![1.0, 0.0]).is_err());
        assert!(FadingSampleSet::new(0, vec![1.0, f64::INFINITY]).is_err());
        assert_eq!(FadingSampleSet::new(3, vec![1.0, 3.0]).unwrap().mean(), 2.0);
    }

    #[test]
    fn sweep_length_must_match() {
        let g = FrequencyGrid::new(1e9, 2e9, 4).unwrap();
        assert!(matches!(CfrSweep::new(g, vec![Complex64::new(1.0, 0.0); 3]), Err(Error::Format(_))));
    }
}

//! Ground-truth channel generator.
//!
//! Each location gets one deterministic line-of-sight tap at the geometric
//! delay plus `scatterers` complex-Gaussian taps spread uniformly over a
//! per-location excess-delay window. The mean power follows a distance power
//! law, modulated by a spatially correlated log-normal shadowing field; the
//! split between LOS and scattered power follows a spatially correlated
//! Rician K-factor field (in dB). Fields are drawn jointly over all locations
//! with a squared-exponential correlation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cfr_from_profile, CfrSweep, FrequencyGrid, MultipathProfile, Path, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::rng::RandomStream;
use crate::scenario::{distance, Location};

/// Lowest accepted sweep span over coherence bandwidth.
pub const MIN_SAMPLING_RATIO: f64 = 100.0;

/// Spatial correlation of a large-scale field at separation `d`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldCorrelation {
    /// `exp(−d / L)`, the classical (Gudmundson) shadowing model.
    #[default]
    Exponential,
    /// `exp(−d² / 2L²)`, a much smoother field.
    Gaussian,
}

/// Gaussian random field over the locations, in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub mean_db: f64,
    pub std_db: f64,
    pub corr_length_m: f64,
    #[serde(default)]
    pub correlation: FieldCorrelation,
}

impl FieldSpec {
    /// Field without spatial variation.
    pub fn constant(mean_db: f64) -> Self {
        Self { mean_db, std_db: 0.0, corr_length_m: 1.0, correlation: FieldCorrelation::Exponential }
    }

    pub fn exponential(mean_db: f64, std_db: f64, corr_length_m: f64) -> Self {
        Self { mean_db, std_db, corr_length_m, correlation: FieldCorrelation::Exponential }
    }
}

impl FieldSpec {
    fn validate(&self, name: &str) -> Result<()> {
        if !(self.std_db >= 0.0 && self.mean_db.is_finite() && self.std_db.is_finite()) {
            return Err(Error::Config(format!("{name}: std_db must be >= 0 and values finite")));
        }
        if !(self.corr_length_m > 0.0) {
            return Err(Error::Config(format!("{name}: corr_length_m must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub scatterers: usize,
    /// Excess-delay window of the scattered taps, drawn per location in this range (seconds).
    pub delay_spread_min_s: f64,
    pub delay_spread_max_s: f64,
    /// Mean power `(c / 4π f_c)² d^{−n}`; 2 is free space.
    pub distance_exponent: f64,
    pub shadowing: FieldSpec,
    /// Rician K-factor field. `None` removes the LOS power entirely (Rayleigh).
    pub k_factor: Option<FieldSpec>,
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.scatterers == 0 && self.k_factor.is_none() {
            return Err(Error::Config(
                "environment without scatterers needs a LOS path (k_factor)".into(),
            ));
        }
        if self.scatterers > 0
            && !(self.delay_spread_min_s > 0.0 && self.delay_spread_max_s >= self.delay_spread_min_s)
        {
            return Err(Error::Config(format!(
                "delay spread range must satisfy 0 < min <= max, got [{}, {}]",
                self.delay_spread_min_s, self.delay_spread_max_s
            )));
        }
        if !(self.distance_exponent >= 0.0 && self.distance_exponent.is_finite()) {
            return Err(Error::Config("distance_exponent must be >= 0".into()));
        }
        self.shadowing.validate("shadowing")?;
        if let Some(k) = &self.k_factor {
            k.validate("k_factor")?;
        }
        Ok(())
    }

    /// Scattering-free environment with all power on the direct path.
    pub fn los_only() -> Self {
        Self {
            scatterers: 0,
            delay_spread_min_s: 0.0,
            delay_spread_max_s: 0.0,
            distance_exponent: 2.0,
            shadowing: FieldSpec::constant(0.0),
            k_factor: Some(FieldSpec::constant(0.0)),
        }
    }
}

/// Sweep span over the coherence bandwidth implied by the smallest configured delay spread.
pub fn frequency_sampling_ratio(env: &EnvironmentSpec, grid: &FrequencyGrid) -> f64 {
    grid.span() * env.delay_spread_min_s
}

/// Per-location parameters read off the large-scale fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteParams {
    /// Mean total power `E|h|²`, linear.
    pub mean_gain: f64,
    /// Share of the mean power carried by the LOS tap, in [0, 1].
    pub los_fraction: f64,
}

/// One joint draw of the shadowing and K-factor fields over a location set.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleFields {
    ids: Vec<usize>,
    shadowing_db: Vec<f64>,
    k_factor_db: Option<Vec<f64>>,
}

fn draw_field(spec: &FieldSpec, locations: &[Location], rng: &mut RandomStream) -> Result<Vec<f64>> {
    let n = locations.len();
    if spec.std_db == 0.0 || n == 0 {
        return Ok(vec![spec.mean_db; n]);
    }
    let l = spec.corr_length_m;
    let mut corr = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = distance(&locations[i], &locations[j]);
            corr[i * n + j] = match spec.correlation {
                FieldCorrelation::Exponential => (-d / l).exp(),
                FieldCorrelation::Gaussian => (-d * d / (2.0 * l * l)).exp(),
            };
        }
    }
    let chol = Cholesky::factor_with_jitter(&corr, n)?;
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Ok(chol.mul_lower(&z).into_iter().map(|v| spec.mean_db + spec.std_db * v).collect())
}

impl LargeScaleFields {
    pub fn draw(env: &EnvironmentSpec, locations: &[Location], rng: &mut RandomStream) -> Result<Self> {
        env.validate()?;
        let shadowing_db = draw_field(&env.shadowing, locations, rng)?;
        let k_factor_db = env
            .k_factor
            .as_ref()
            .map(|k| draw_field(k, locations, rng))
            .transpose()?;
        Ok(Self {
            ids: locations.iter().map(|l| l.id).collect(),
            shadowing_db,
            k_factor_db,
        })
    }

    fn index_of(&self, id: usize) -> Result<usize> {
        self.ids
            .iter()
            .position(|&i| i == id)
            .ok_or_else(|| Error::Config(format!("location {id} is not covered by the fields")))
    }

    pub fn shadowing_db(&self, id: usize) -> Result<f64> {
        Ok(self.shadowing_db[self.index_of(id)?])
    }

    pub fn k_factor_db(&self, id: usize) -> Result<Option<f64>> {
        let i = self.index_of(id)?;
        Ok(self.k_factor_db.as_ref().map(|k| k[i]))
    }

    /// Adds `offset_db` to the shadowing at one location (engineered outliers).
    pub fn offset_shadowing_db(&mut self, id: usize, offset_db: f64) -> Result<()> {
        let i = self.index_of(id)?;
        self.shadowing_db[i] += offset_db;
        Ok(())
    }

    pub fn site(&self, env: &EnvironmentSpec, loc: &Location, bs: &Location, carrier_hz: f64) -> Result<SiteParams> {
        let d = distance(loc, bs);
        if !(d > 0.0) {
            return Err(Error::Config(format!("location {} coincides with the base station", loc.id)));
        }
        let free_space_1m = (SPEED_OF_LIGHT / (4.0 * PI * carrier_hz)).powi(2);
        let mean_gain = free_space_1m * d.powf(-env.distance_exponent) * 10f64.powf(self.shadowing_db(loc.id)? / 10.0);
        let los_fraction = if env.scatterers == 0 {
            1.0
        } else {
            match self.k_factor_db(loc.id)? {
                Some(k_db) => {
                    let k = 10f64.powf(k_db / 10.0);
                    k / (1.0 + k)
                }
                None => 0.0,
            }
        };
        Ok(SiteParams { mean_gain, los_fraction })
    }
}

/// Tapped-delay line for one location. Path 0 is the LOS tap at delay `d / c`.
pub fn synth_multipath(
    env: &EnvironmentSpec,
    site: &SiteParams,
    loc: &Location,
    bs: &Location,
    rng: &mut RandomStream,
) -> Result<MultipathProfile> {
    let d = distance(loc, bs);
    if !(d > 0.0) {
        return Err(Error::Config(format!("location {} coincides with the base station", loc.id)));
    }
    let tau_los = d / SPEED_OF_LIGHT;
    let mut paths = Vec::with_capacity(env.scatterers + 1);
    paths.push(Path {
        coefficient: Complex64::new((site.mean_gain * site.los_fraction).sqrt(), 0.0),
        delay: tau_los,
    });
    if env.scatterers > 0 {
        let spread = if env.delay_spread_max_s > env.delay_spread_min_s {
            rng.random_range(env.delay_spread_min_s..env.delay_spread_max_s)
        } else {
            env.delay_spread_min_s
        };
        let per_path_std = (site.mean_gain * (1.0 - site.los_fraction) / env.scatterers as f64 / 2.0).sqrt();
        for _ in 0..env.scatterers {
            // (0, 1]: scattered paths arrive strictly after the LOS tap
            let u = 1.0 - rng.random::<f64>();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            paths.push(Path {
                coefficient: Complex64::new(re * per_path_std, im * per_path_std),
                delay: tau_los + u * spread,
            });
        }
    }
    MultipathProfile::new(paths)
}

/// Profiles for every location; location `id` draws from substream `("location", id)`.
pub fn synthesize_profiles(
    env: &EnvironmentSpec,
    fields: &LargeScaleFields,
    locations: &[Location],
    bs: &Location,
    carrier_hz: f64,
    rng: &RandomStream,
) -> Result<Vec<MultipathProfile>> {
    env.validate()?;
    locations
        .par_iter()
        .map(|loc| {
            let site = fields.site(env, loc, bs, carrier_hz)?;
            let mut stream = rng.derive("location", loc.id as u64);
            synth_multipath(env, &site, loc, bs, &mut stream)
        })
        .collect()
}

/// Synthetic soundings over `grid` for every location.
///
/// Rejects environments whose smallest delay spread makes the sweep span less
/// than [`MIN_SAMPLING_RATIO`] coherence bandwidths wide.
pub fn synthesize_sweeps(
    env: &EnvironmentSpec,
    fields: &LargeScaleFields,
    locations: &[Location],
    bs: &Location,
    grid: &FrequencyGrid,
    rng: &RandomStream,
) -> Result<Vec<CfrSweep>> {
    if env.scatterers > 0 {
        let ratio = frequency_sampling_ratio(env, grid);
        if ratio < MIN_SAMPLING_RATIO {
            return Err(Error::Config(format!(
                "sweep span is only {ratio:.1} coherence bandwidths (need >= {MIN_SAMPLING_RATIO}); \
                 widen the band or increase delay_spread_min_s"
            )));
        }
    }
    let profiles = synthesize_profiles(env, fields, locations, bs, grid.center(), rng)?;
    Ok(profiles.par_iter().map(|p| cfr_from_profile(p, grid)).collect())
}

//! Scenario and campaign configuration files.
//!
//! Scenario (`version = 1`):
//!
//! ```toml
//! version = 1
//! seed = 7                      # optional; the CLI's --seed wins
//!
//! [grid]
//! kind = "hexagonal"            # or "triangular" with origin, rows, cols
//! center = { x = 0.0, y = 0.0 }
//! rings = 6                     # 127 points
//! side = 5.0                    # m
//!
//! [base_station]
//! x = 0.0
//! y = -40.0
//!
//! [link]
//! gamma_tx_db = 114.0           # or p_tx_dbm + bandwidth_hz + noise_dbm_per_hz
//!
//! [sweep]
//! f_min_hz = 2e9
//! f_max_hz = 10e9
//! n_points = 8001
//!
//! [environment]
//! scatterers = 40
//! delay_spread_min_s = 100e-9
//! delay_spread_max_s = 600e-9
//! distance_exponent = 2.0
//! shadowing = { mean_db = 0.0, std_db = 4.0, corr_length_m = 15.0 }
//! k_factor = { mean_db = 0.0, std_db = 3.0, corr_length_m = 15.0 }
//!
//! [[outliers]]                  # optional engineered shadowing offsets
//! location_id = 3
//! offset_db = -8.0
//! ```
//!
//! Campaign (`version = 1`): a `[campaign]` table holding the fields of
//! [`EvalConfig`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::read_text;
use crate::channel::{synthesize_sweeps, CfrSweep, EnvironmentSpec, FrequencyGrid, LargeScaleFields};
use crate::error::{Error, Result};
use crate::evaluate::EvalConfig;
use crate::rng::RandomStream;
use crate::scenario::{generate_hexagonal_grid, generate_triangular_grid, GridSpec, LinkBudget, Location};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
}

impl Point {
    pub fn to_location(self, id: usize) -> Location {
        Location::new(id, self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridConfig {
    Hexagonal { center: Point, rings: usize, side: f64 },
    Triangular { origin: Point, rows: usize, cols: usize, side: f64 },
}

impl GridConfig {
    pub fn locations(&self) -> Result<Vec<Location>> {
        match *self {
            GridConfig::Hexagonal { center, rings, side } => generate_hexagonal_grid(&center.to_location(0), rings, side),
            GridConfig::Triangular { origin, rows, cols, side } => {
                generate_triangular_grid(&GridSpec { origin: origin.to_location(0), rows, cols, side })
            }
        }
    }
}

/// Either `gamma_tx_db` alone or `p_tx_dbm` + `bandwidth_hz` + `noise_dbm_per_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub gamma_tx_db: Option<f64>,
    pub p_tx_dbm: Option<f64>,
    pub bandwidth_hz: Option<f64>,
    pub noise_dbm_per_hz: Option<f64>,
}

impl LinkConfig {
    pub fn budget(&self) -> Result<LinkBudget> {
        match (self.gamma_tx_db, self.p_tx_dbm, self.bandwidth_hz, self.noise_dbm_per_hz) {
            (Some(g), None, None, None) => LinkBudget::new(10f64.powf(g / 10.0)),
            (None, Some(p), Some(b), Some(n0)) => LinkBudget::from_dbm(p, b, n0),
            _ => Err(Error::Config(
                "link: give either `gamma_tx_db` or all of `p_tx_dbm`, `bandwidth_hz`, `noise_dbm_per_hz`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub n_points: usize,
}

impl SweepConfig {
    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.f_min_hz, self.f_max_hz, self.n_points)
    }

    pub fn from_grid(g: &FrequencyGrid) -> Self {
        Self { f_min_hz: g.f_min(), f_max_hz: g.f_max(), n_points: g.n_points() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlierSpec {
    pub location_id: usize,
    /// Added to the shadowing field at that location, dB.
    pub offset_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub seed: Option<u64>,
    pub grid: GridConfig,
    pub base_station: Point,
    pub link: LinkConfig,
    pub sweep: SweepConfig,
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub outliers: Vec<OutlierSpec>,
}

/// Output of [`ScenarioConfig::synthesize`].
#[derive(Debug, Clone)]
pub struct SyntheticScenario {
    pub locations: Vec<Location>,
    pub base_station: Location,
    pub gamma_tx: f64,
    pub fields: LargeScaleFields,
    pub sweeps: Vec<CfrSweep>,
}

fn check_version(found: u32, what: &str) -> Result<()> {
    if found != CONFIG_VERSION {
        return Err(Error::Config(format!("{what}: unsupported version {found} (expected {CONFIG_VERSION})")));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("scenario config: {e}")))?;
        check_version(cfg.version, "scenario config")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("scenario config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.version, "scenario config")?;
        self.environment.validate()?;
        self.link.budget()?;
        self.sweep.grid()?;
        let locations = self.grid.locations()?;
        for o in &self.outliers {
            if !locations.iter().any(|l| l.id == o.location_id) {
                return Err(Error::Config(format!("outlier location {} is not on the grid", o.location_id)));
            }
        }
        Ok(())
    }

    /// Draws the large-scale fields from substream `("fields", 0)` and each
    /// location's multipath from `("location", id)` of the root `seed`.
    pub fn synthesize(&self, seed: u64) -> Result<SyntheticScenario> {
        self.validate()?;
        let locations = self.grid.locations()?;
        let bs = self.base_station.to_location(usize::MAX);
        let grid = self.sweep.grid()?;
        let root = RandomStream::new(seed);
        let mut fields = LargeScaleFields::draw(&self.environment, &locations, &mut root.derive("fields", 0))?;
        for o in &self.outliers {
            fields.offset_shadowing_db(o.location_id, o.offset_db)?;
        }
        let sweeps = synthesize_sweeps(&self.environment, &fields, &locations, &bs, &grid, &root)?;
        Ok(SyntheticScenario {
            locations,
            base_station: bs,
            gamma_tx: self.link.budget()?.gamma_tx(),
            fields,
            sweeps,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalConfigFile {
    version: u32,
    campaign: EvalConfig,
}

pub fn parse_eval_config(text: &str) -> Result<EvalConfig> {
    let f: EvalConfigFile = toml::from_str(text).map_err(|e| Error::Config(format!("campaign config: {e}")))?;
    check_version(f.version, "campaign config")?;
    Ok(f.campaign)
}

pub fn load_eval_config(path: &Path) -> Result<EvalConfig> {
    parse_eval_config(&read_text(path)?).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

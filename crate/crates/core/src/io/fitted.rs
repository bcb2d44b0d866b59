//! Fitted-map export: hyperparameters plus the training quantiles, enough to
//! rebuild the identical predictor.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, write_new, CONFIG_VERSION};
use crate::cdimap::{CdiMap, GpHyperparameters, QuantileDataset, QuantileEntry};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedMap {
    pub version: u32,
    pub epsilon: f64,
    /// Samples per training location.
    pub n_samples: usize,
    pub hyperparameters: GpHyperparameters,
    /// In location-id order.
    pub entries: Vec<QuantileEntry>,
    /// Ids of the locations held out of training, if the map came from a split.
    #[serde(default)]
    pub held_out: Vec<usize>,
}

impl FittedMap {
    pub fn from_map(map: &CdiMap) -> Self {
        let data = map.data();
        Self {
            version: CONFIG_VERSION,
            epsilon: data.epsilon(),
            n_samples: data.n_samples(),
            hyperparameters: *map.hyperparameters(),
            entries: data.entries().to_vec(),
            held_out: Vec::new(),
        }
    }

    pub fn to_map(&self) -> Result<CdiMap> {
        let data = QuantileDataset::new(self.entries.clone(), self.epsilon, self.n_samples)?;
        CdiMap::new(&data, self.hyperparameters)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(format!("fitted map: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Format(format!("fitted map: {e}")))?;
        if m.version != CONFIG_VERSION {
            return Err(Error::Format(format!("fitted map: unsupported version {}", m.version)));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_new(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

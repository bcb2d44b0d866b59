//! Measurement directories: `manifest.toml` plus one sweep file per location.
//!
//! Text sweeps (`loc_NNNN.csv`) carry `frequency_hz,re,im` rows with 17
//! significant digits. Binary sweeps (`loc_NNNN.cfrb`) are little-endian:
//!
//! | bytes | content                      |
//! |-------|------------------------------|
//! | 4     | magic `CFRB`                 |
//! | 4     | u32 format version (1)       |
//! | 8     | u64 location id              |
//! | 8     | u64 point count `n`          |
//! | 8+8   | f64 `f_min_hz`, `f_max_hz`   |
//! | 16·n  | f64 pairs `(re, im)`         |
//!
//! Complex values are linear amplitude (not dB).

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::{Point, SweepConfig};
use super::{ensure_absent, fmt_f64, read_text, write_new, CONFIG_VERSION};
use crate::channel::{CfrSweep, FrequencyGrid};
use crate::error::{Error, Result};
use crate::scenario::Location;

pub const MEASUREMENT_MANIFEST: &str = "manifest.toml";
const MAGIC: &[u8; 4] = b"CFRB";
const BINARY_VERSION: u32 = 1;
const HEADER_LEN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepFormat {
    #[default]
    Csv,
    Binary,
}

impl SweepFormat {
    fn extension(self) -> &'static str {
        match self {
            SweepFormat::Csv => "csv",
            SweepFormat::Binary => "cfrb",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationEntry {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementManifest {
    pub version: u32,
    pub format: SweepFormat,
    /// Linear transmit SNR the sweeps were synthesized for.
    pub gamma_tx: Option<f64>,
    pub base_station: Option<Point>,
    pub sweep: SweepConfig,
    pub locations: Vec<LocationEntry>,
}

/// Sweeps for a set of locations on one frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub gamma_tx: Option<f64>,
    pub base_station: Option<Location>,
    pub locations: Vec<Location>,
    pub sweeps: Vec<CfrSweep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptRecord {
    pub location_id: usize,
    pub file: PathBuf,
    pub message: String,
}

fn sweep_file_name(id: usize, format: SweepFormat) -> String {
    format!("loc_{id:04}.{}", format.extension())
}

pub fn sweep_csv_bytes(location_id: usize, sweep: &CfrSweep) -> Vec<u8> {
    let mut s = String::with_capacity(64 * sweep.values().len() + 64);
    s.push_str(&format!("# location_id={location_id}\nfrequency_hz,re,im\n"));
    for (f, v) in sweep.grid().frequencies().zip(sweep.values()) {
        s.push_str(&fmt_f64(f));
        s.push(',');
        s.push_str(&fmt_f64(v.re));
        s.push(',');
        s.push_str(&fmt_f64(v.im));
        s.push('\n');
    }
    s.into_bytes()
}

pub fn sweep_binary_bytes(location_id: usize, sweep: &CfrSweep) -> Vec<u8> {
    let g = sweep.grid();
    let mut b = Vec::with_capacity(HEADER_LEN + 16 * sweep.values().len());
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    b.extend_from_slice(&(location_id as u64).to_le_bytes());
    b.extend_from_slice(&(g.n_points() as u64).to_le_bytes());
    b.extend_from_slice(&g.f_min().to_le_bytes());
    b.extend_from_slice(&g.f_max().to_le_bytes());
    for v in sweep.values() {
        b.extend_from_slice(&v.re.to_le_bytes());
        b.extend_from_slice(&v.im.to_le_bytes());
    }
    b
}

/// Parses a text sweep, checking that its frequencies sit on `grid`.
pub fn read_sweep_csv(text: &str, grid: &FrequencyGrid) -> Result<CfrSweep> {
    let mut values = Vec::with_capacity(grid.n_points());
    let mut saw_header = false;
    let tol = 1e-6 * grid.step().max(1.0);
    for (ln, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "frequency_hz,re,im" {
                return Err(Error::Format(format!("line {ln}: expected header `frequency_hz,re,im`")));
            }
            saw_header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Format(format!("line {ln}: expected 3 columns, found {}", cols.len())));
        }
        let num = |s: &str, name: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Format(format!("line {ln}: bad {name} value `{s}`")))
        };
        let (f, re, im) = (num(cols[0], "frequency_hz")?, num(cols[1], "re")?, num(cols[2], "im")?);
        let i = values.len();
        if i >= grid.n_points() || (f - grid.frequency(i)).abs() > tol {
            return Err(Error::Format(format!("line {ln}: frequency {f} Hz is not grid point {i}")));
        }
        values.push(Complex64::new(re, im));
    }
    if values.len() != grid.n_points() {
        return Err(Error::Format(format!("expected {} rows, found {}", grid.n_points(), values.len())));
    }
    CfrSweep::new(*grid, values)
}

/// Parses a binary sweep; returns the location id stored in its header.
pub fn read_sweep_binary(bytes: &[u8]) -> Result<(usize, CfrSweep)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a CFRB sweep (bad magic or short header)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != BINARY_VERSION {
        return Err(Error::Format(format!("unsupported CFRB version {version}")));
    }
    let id = u64_at(8) as usize;
    let n = u64_at(16) as usize;
    let grid = FrequencyGrid::new(f64_at(24), f64_at(32), n)?;
    if bytes.len() != HEADER_LEN + 16 * n {
        return Err(Error::Format(format!("CFRB body holds {} bytes, expected {}", bytes.len() - HEADER_LEN, 16 * n)));
    }
    let values = (0..n)
        .map(|i| {
            let o = HEADER_LEN + 16 * i;
            Complex64::new(f64_at(o), f64_at(o + 8))
        })
        .collect();
    Ok((id, CfrSweep::new(grid, values)?))
}

/// Writes a measurement directory; returns the paths written (manifest last).
pub fn write_measurements(dir: &Path, set: &MeasurementSet, format: SweepFormat) -> Result<Vec<PathBuf>> {
    if set.locations.len() != set.sweeps.len() || set.sweeps.is_empty() {
        return Err(Error::Config("one sweep per location required".into()));
    }
    let grid = *set.sweeps[0].grid();
    if set.sweeps.iter().any(|s| *s.grid() != grid) {
        return Err(Error::Config("all sweeps must share one frequency grid".into()));
    }
    let manifest = MeasurementManifest {
        version: CONFIG_VERSION,
        format,
        gamma_tx: set.gamma_tx,
        base_station: set.base_station.map(|b| Point { x: b.x, y: b.y, z: b.z }),
        sweep: SweepConfig::from_grid(&grid),
        locations: set
            .locations
            .iter()
            .map(|l| LocationEntry { id: l.id, x: l.x, y: l.y, z: l.z, file: sweep_file_name(l.id, format) })
            .collect(),
    };
    let mut paths: Vec<PathBuf> = manifest.locations.iter().map(|e| dir.join(&e.file)).collect();
    paths.push(dir.join(MEASUREMENT_MANIFEST));
    ensure_absent(&paths)?;
    for ((loc, sweep), path) in set.locations.iter().zip(&set.sweeps).zip(&paths) {
        let bytes = match format {
            SweepFormat::Csv => sweep_csv_bytes(loc.id, sweep),
            SweepFormat::Binary => sweep_binary_bytes(loc.id, sweep),
        };
        write_new(path, &bytes)?;
    }
    let text = toml::to_string(&manifest).map_err(|e| Error::Format(format!("measurement manifest: {e}")))?;
    write_new(paths.last().unwrap(), text.as_bytes())?;
    Ok(paths)
}

fn read_manifest(dir: &Path) -> Result<MeasurementManifest> {
    let path = dir.join(MEASUREMENT_MANIFEST);
    let m: MeasurementManifest =
        toml::from_str(&read_text(&path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if m.version != CONFIG_VERSION {
        return Err(Error::Format(format!("{}: unsupported version {}", path.display(), m.version)));
    }
    if m.locations.is_empty() {
        return Err(Error::Format(format!("{}: no locations listed", path.display())));
    }
    Ok(m)
}

fn read_one(dir: &Path, m: &MeasurementManifest, e: &LocationEntry, grid: &FrequencyGrid) -> Result<CfrSweep> {
    let path = dir.join(&e.file);
    match m.format {
        SweepFormat::Csv => read_sweep_csv(&read_text(&path)?, grid),
        SweepFormat::Binary => {
            let bytes = std::fs::read(&path).map_err(|err| Error::io(&path, err))?;
            let (id, sweep) = read_sweep_binary(&bytes)?;
            if id != e.id {
                return Err(Error::Format(format!("header says location {id}, manifest says {}", e.id)));
            }
            if sweep.grid() != grid {
                return Err(Error::Format("frequency grid differs from the manifest".into()));
            }
            Ok(sweep)
        }
    }
}

/// Loads every readable sweep and lists the ones that could not be read.
pub fn load_measurements_lenient(dir: &Path) -> Result<(MeasurementSet, Vec<CorruptRecord>)> {
    let m = read_manifest(dir)?;
    let grid = m.sweep.grid()?;
    let mut set = MeasurementSet {
        gamma_tx: m.gamma_tx,
        base_station: m.base_station.map(|p| p.to_location(usize::MAX)),
        locations: Vec::new(),
        sweeps: Vec::new(),
    };
    let mut corrupt = Vec::new();
    for e in &m.locations {
        match read_one(dir, &m, e, &grid) {
            Ok(s) => {
                set.locations.push(Location::new(e.id, e.x, e.y, e.z));
                set.sweeps.push(s);
            }
            Err(err) => corrupt.push(CorruptRecord { location_id: e.id, file: dir.join(&e.file), message: err.to_string() }),
        }
    }
    Ok((set, corrupt))
}

/// Loads a measurement directory; any unreadable sweep is an error.
pub fn load_measurements(dir: &Path) -> Result<MeasurementSet> {
    let (set, corrupt) = load_measurements_lenient(dir)?;
    if let Some(c) = corrupt.first() {
        return Err(Error::Format(format!(
            "{} of {} sweeps unreadable; first: {}: {}",
            corrupt.len(),
            corrupt.len() + set.locations.len(),
            c.file.display(),
            c.message
        )));
    }
    Ok(set)
}

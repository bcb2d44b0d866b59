//! File formats: scenario and campaign configs (TOML), measurement sweeps
//! (CSV or binary), fitted maps and reports (JSON + CSV), run manifests.
//!
//! Every writer refuses to overwrite and goes through a temporary file that
//! is renamed into place, so a crashed run never leaves a half-written output.

mod config;
mod fitted;
mod manifest;
mod measurement;
mod report;

pub use config::{
    load_eval_config, parse_eval_config, GridConfig, LinkConfig, OutlierSpec, Point, ScenarioConfig, SweepConfig,
    SyntheticScenario, CONFIG_VERSION,
};
pub use fitted::FittedMap;
pub use manifest::{FileDigest, RunManifest, SeedSource};
pub use measurement::{
    load_measurements, load_measurements_lenient, read_sweep_binary, read_sweep_csv, sweep_binary_bytes,
    sweep_csv_bytes, write_measurements, CorruptRecord, MeasurementManifest, MeasurementSet, SweepFormat,
    MEASUREMENT_MANIFEST,
};
pub use report::{
    load_report, records_csv, report_json, summary_text, validation_csv, write_plot_data, write_report, RECORDS_FILE,
    REPORT_FILE,
};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

/// Writes `bytes` to a new file at `path` via temp-file-then-rename.
pub fn write_new(path: &Path, bytes: &[u8]) -> Result<()> {
    if path.exists() {
        return Err(Error::OutputExists(path.to_path_buf()));
    }
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Errors with the first of `paths` that already exists.
pub fn ensure_absent(paths: &[PathBuf]) -> Result<()> {
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(Error::OutputExists(p.clone())),
        None => Ok(()),
    }
}

/// Full-precision text form of a float: 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

//! Reproducibility envelope written next to every command's outputs.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{read_text, sha256_file, write_new};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    /// Given on the command line or in a config file.
    Explicit,
    /// Drawn from OS entropy because none was given.
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the manifest's directory when possible.
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path, base: &Path) -> Result<Self> {
        let shown = path.strip_prefix(base).unwrap_or(path);
        Ok(Self { path: shown.to_string_lossy().into_owned(), sha256: sha256_file(path)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// SHA-256 of the configuration text the run consumed.
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub seed_source: SeedSource,
    /// Unix seconds.
    pub started: u64,
    pub finished: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, seed_source: SeedSource) -> Self {
        Self {
            tool: "cdimap".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: None,
            seed,
            seed_source,
            started: unix_now(),
            finished: 0,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(format!("run manifest: {e}")))
    }

    /// Stamps the finish time and writes the manifest (never overwrites).
    pub fn write(&mut self, path: &Path) -> Result<()> {
        self.finished = unix_now();
        write_new(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_text(path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Output paths (relative to `base`) whose current digest differs from the recorded one.
    pub fn stale_outputs(&self, base: &Path) -> Result<Vec<String>> {
        let mut stale = Vec::new();
        for d in &self.outputs {
            let p = base.join(&d.path);
            if !p.exists() || sha256_file(&p)? != d.sha256 {
                stale.push(d.path.clone());
            }
        }
        Ok(stale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_track_files() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("out.txt");
        write_new(&f, b"hello").unwrap();
        let mut m = RunManifest::new("synth", 9, SeedSource::Explicit);
        m.outputs.push(FileDigest::of(&f, dir.path()).unwrap());
        assert_eq!(m.outputs[0].path, "out.txt");
        let mp = dir.path().join("run_manifest.json");
        m.write(&mp).unwrap();
        let back = RunManifest::load(&mp).unwrap();
        assert_eq!(back, m);
        assert!(back.stale_outputs(dir.path()).unwrap().is_empty());
        std::fs::write(&f, b"changed").unwrap();
        assert_eq!(back.stale_outputs(dir.path()).unwrap(), vec!["out.txt".to_string()]);
    }
}

//! Per-run manifest records.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// One line per run, appended to `manifest.json` (JSON lines) at the run
/// directory root.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    /// Snapshot of the config file contents, when one was given.
    pub config_snapshot: Option<String>,
    pub seed: u64,
    pub artifacts: Vec<String>,
    pub wall_clock_s: f64,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            args: std::env::args().collect(),
            config_snapshot: None,
            seed,
            artifacts: Vec::new(),
            wall_clock_s: 0.0,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn add_artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    /// Appends this manifest as one JSON line to `<dir>/manifest.json`.
    pub fn append_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let line = serde_json::to_string(self).expect("manifest serializes");
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join("manifest.json"))?;
        writeln!(f, "{line}")?;
        Ok(())
    }
}

//! Report files and the run manifest. Every file is written to a temporary
//! sibling and renamed into place.

use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChecklistEntry {
    /// Acceptance criterion identifier, e.g. `C9`.
    pub criterion: String,
    pub name: String,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub version: String,
    pub seed: Option<u64>,
    pub started: f64,
    pub finished: f64,
    pub artifacts: Vec<PathBuf>,
    pub checklist: Vec<ChecklistEntry>,
}

pub fn unix_time() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Collects artifacts of one command invocation.
pub struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Outputs {
    pub fn new(dir: &Path, command: &str, config: serde_json::Value, seed: Option<u64>) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.into(),
                config,
                version: env!("CARGO_PKG_VERSION").into(),
                seed,
                started: unix_time(),
                finished: 0.0,
                artifacts: Vec::new(),
                checklist: Vec::new(),
            },
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        axbl::snapshot::write_atomic(&path, text.as_bytes()).map_err(std::io::Error::other)?;
        self.manifest.artifacts.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        self.write_text(name, &(text + "\n"))
    }

    /// Registers a file written by someone else.
    pub fn record(&mut self, path: PathBuf) {
        self.manifest.artifacts.push(path);
    }

    pub fn check(&mut self, criterion: &str, name: &str, passed: bool) {
        self.manifest.checklist.push(ChecklistEntry { criterion: criterion.into(), name: name.into(), passed });
    }

    pub fn finish(mut self) -> std::io::Result<RunManifest> {
        self.manifest.finished = unix_time();
        let path = self.dir.join("manifest.json");
        let mut m = self.manifest.clone();
        m.artifacts.push(path.clone());
        let text = serde_json::to_string_pretty(&m).map_err(std::io::Error::other)?;
        axbl::snapshot::write_atomic(&path, (text + "\n").as_bytes()).map_err(std::io::Error::other)?;
        Ok(m)
    }
}

//! Run manifests in the flat `key = value` grammar of the configuration files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};
use crate::experiment::config::{parse_key_values, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Complete,
    Failed,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Complete => "complete",
            Status::Failed => "failed",
        }
    }
}

/// Ordered record of one command invocation.
#[derive(Debug, Clone)]
pub struct Manifest {
    path: PathBuf,
    command: String,
    status: Status,
    config: String,
    entries: Vec<(String, String)>,
    artifacts: Vec<String>,
    started: u64,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl Manifest {
    /// Creates `manifest_<command>.txt` in the output directory with status `running`.
    pub fn start(cfg: &ExperimentConfig, command: &str) -> Result<Self> {
        let dir = &cfg.output_dir;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let m = Self {
            path: dir.join(format!("manifest_{command}.txt")),
            command: command.to_string(),
            status: Status::Running,
            config: cfg.to_text(),
            entries: Vec::new(),
            artifacts: Vec::new(),
            started: unix_now(),
        };
        m.write()?;
        Ok(m)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    /// Records a file written into the output directory.
    pub fn artifact(&mut self, name: impl Into<String>) {
        let name = name.into();
        if !self.artifacts.contains(&name) {
            self.artifacts.push(name);
        }
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    pub fn finish(mut self, status: Status) -> Result<()> {
        self.status = status;
        self.set("finished_unix", unix_now());
        self.write()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command = {}", self.command);
        let _ = writeln!(out, "status = {}", self.status.as_str());
        let _ = writeln!(out, "version = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "started_unix = {}", self.started);
        for line in self.config.lines() {
            let _ = writeln!(out, "config.{line}");
        }
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "artifacts = {}", self.artifacts.join(","));
        out
    }

    fn write(&self) -> Result<()> {
        std::fs::write(&self.path, self.render()).map_err(|e| Error::io(&self.path, e))
    }
}

/// Reads `key` from a manifest file, if both exist.
pub fn read_manifest_value(path: &Path, key: &str) -> Result<Option<String>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_key_values(&text)?.remove(key))
}

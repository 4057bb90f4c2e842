use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Machine-readable result of one command invocation.
///
/// Contains nothing time- or host-dependent, so identical inputs, flags and
/// seed give identical bytes.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub config_echo: Value,
    pub seed: u64,
    pub results: Value,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn new(command: &'static str, config_echo: impl Serialize, seed: u64) -> Result<Self> {
        Ok(Self {
            command,
            config_echo: serde_json::to_value(config_echo)?,
            seed,
            results: Value::Null,
            warnings: Vec::new(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes the report to `out`, or stdout when no path was given.
    pub fn emit(&self, out: Option<&Path>) -> Result<()> {
        for w in &self.warnings {
            log::warn!("{w}");
        }
        match out {
            Some(path) => write_file(path, self.to_json()?.as_bytes()),
            None => {
                print!("{}", self.to_json()?);
                Ok(())
            }
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// `report.json` + `fid` → `report.fid.csv`; an empty suffix gives `report.csv`.
pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = if suffix.is_empty() {
        format!("{stem}.{ext}")
    } else {
        format!("{stem}.{suffix}.{ext}")
    };
    path.with_file_name(name)
}

//! Verdict files: the checks a run performed and the hashes of its inputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Pass when `value <= tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }

    /// A yes/no property; `value` is 1 for a pass.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, tolerance: 1.0, passed: ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub threads: usize,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub command: String,
    pub config_hash: String,
    pub content_hash: String,
    pub environment: Environment,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Verdict {
    pub fn new(command: &str, config: &ExperimentConfig, checks: Vec<Check>) -> Self {
        Self {
            command: command.to_string(),
            config_hash: config.hash(),
            content_hash: config.content_hash(),
            environment: Environment::current(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("verdict serializes");
        fs::write(path, text + "\n").with_context(|| format!("writing verdict {}", path.display()))
    }
}

/// `results.csv` -> `results.verdict.json`.
pub fn verdict_path(out: &Path) -> PathBuf {
    out.with_extension("verdict.json")
}

/// Write a CSV with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

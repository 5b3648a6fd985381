//! Experiment configuration: a JSON file naming a registered fixture, its
//! parameters and the solver settings.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use snell_core::fixtures;
use snell_core::game::{GameGrid, MarkPartition};
use snell_core::model::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Tree,
    Lsmc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Allowed `|lower - Y^n|` at the largest penalty level.
    pub value_gap: f64,
    /// Allowed `lower - upper` on the tree.
    pub order: f64,
    /// Allowed saddle-chain violation and identity error.
    pub saddle: f64,
    /// Allowed barrier or slackness defect of the penalized solution.
    pub skorokhod: f64,
    /// Monte Carlo checks pass within this many standard errors.
    pub sigmas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { value_gap: 0.05, order: 0.0, saddle: 1e-10, skorokhod: 1e-12, sigmas: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub fixture: String,
    /// Overrides of the fixture's numeric parameters.
    pub params: BTreeMap<String, f64>,
    /// Largest admissible grid step; the grid uses `T / 2^i <= eps`.
    pub eps: Option<f64>,
    /// Grid steps, used when `eps` is absent (power of two for the game).
    pub steps: Option<usize>,
    /// Intervention budgets `k`.
    pub budgets: Vec<i64>,
    /// Penalty levels `n`, increasing.
    pub penalties: Vec<f64>,
    /// Grid steps for refinement sweeps.
    pub eps_list: Vec<f64>,
    pub max_batch: Option<usize>,
    pub backend: Backend,
    pub seed: u64,
    /// Monte Carlo paths.
    pub samples: usize,
    /// Random probes for the saddle check.
    pub probes: usize,
    pub tolerances: Tolerances,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            fixture: "f1".into(),
            params: BTreeMap::new(),
            eps: None,
            steps: None,
            budgets: vec![3],
            penalties: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            eps_list: Vec::new(),
            max_batch: None,
            backend: Backend::Tree,
            seed: 0,
            samples: 10_000,
            probes: 50,
            tolerances: Tolerances::default(),
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).context("parsing config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.problem()?;
        if let Some(k) = self.budgets.iter().find(|k| **k < 0) {
            return Err(snell_core::Error::Spec(format!("budget {k} is negative")).into());
        }
        if self.penalties.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            bail!("penalty levels must be finite and non-negative");
        }
        if self.penalties.windows(2).any(|w| w[1] <= w[0]) {
            bail!("penalty levels must increase");
        }
        if self.eps.is_some_and(|e| !(e > 0.0)) || self.eps_list.iter().any(|e| !(*e > 0.0)) {
            bail!("grid steps must be positive");
        }
        if self.steps == Some(0) {
            bail!("steps must be positive");
        }
        if self.samples == 0 {
            bail!("samples must be positive");
        }
        let t = &self.tolerances;
        if [t.value_gap, t.order, t.saddle, t.skorokhod, t.sigmas].iter().any(|v| !(*v >= 0.0)) {
            bail!("tolerances must be non-negative");
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        Ok(fixtures::build(&self.fixture, &self.params)?)
    }

    pub fn budgets(&self) -> Vec<usize> {
        self.budgets.iter().map(|&k| k as usize).collect()
    }

    /// Game grid from `eps`, else from `steps`, else the fixture default.
    pub fn grid(&self, problem: &ProblemSpec, eps: Option<f64>) -> Result<GameGrid> {
        let partition = MarkPartition::identity(problem.marks().len());
        let horizon = problem.horizon();
        match eps.or(self.eps) {
            Some(e) => Ok(GameGrid::new(horizon, e, partition)?),
            None => {
                let steps = self.steps.unwrap_or_else(|| fixtures::default_steps(&self.fixture));
                if !steps.is_power_of_two() {
                    bail!("game grids need a power-of-two step count, got {steps}");
                }
                Ok(GameGrid::from_iota(horizon, steps.trailing_zeros(), partition)?)
            }
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Git-style content hash: SHA-256 of `blob <len>\0<bytes>` over the
    /// canonical JSON.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", canonical.len()).as_bytes());
        h.update(canonical.as_bytes());
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let mut c = ExperimentConfig::default();
        c.params.insert("chi".into(), 0.1 + 0.2);
        c.eps = Some(0.125);
        c.penalties = vec![0.5, 1e-7 + 1.0, 1024.0];
        c.backend = Backend::Lsmc;
        c.output = Some("out.csv".into());
        let back = ExperimentConfig::parse(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let c = ExperimentConfig::parse(r#"{"fixture": "reward-flow"}"#).unwrap();
        assert_eq!(c.budgets, vec![3]);
        assert_eq!(c.tolerances, Tolerances::default());
    }

    #[test]
    fn bad_configs_are_rejected() {
        for text in [
            r#"{"fixture": "nope"}"#,
            r#"{"fixture": "f1", "budgets": [-1]}"#,
            r#"{"fixture": "f1", "params": {"sigma": -1}}"#,
            r#"{"fixture": "f1", "penalties": [2, 1]}"#,
            r#"{"fixture": "f1", "colour": 1}"#,
        ] {
            assert!(ExperimentConfig::parse(text).is_err(), "{text}");
        }
        let err = ExperimentConfig::parse(r#"{"fixture": "f1", "budgets": [-2]}"#).unwrap_err();
        assert!(matches!(err.downcast_ref::<snell_core::Error>(), Some(snell_core::Error::Spec(_))));
    }

    #[test]
    fn hash_is_stable() {
        // Pinned so that a change in the canonical form is noticed.
        let c = ExperimentConfig::default();
        assert_eq!(c.hash(), "c4889c3f807ff61b0d5a125f9521dbbc1784c802f9441748f55ca291f9c1e8ec");
        assert_eq!(c.hash(), ExperimentConfig::default().hash());
        let mut d = c.clone();
        d.seed = 1;
        assert_ne!(c.hash(), d.hash());
        assert_ne!(c.hash(), c.content_hash());
    }
}

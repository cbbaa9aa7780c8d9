//! Experiment sweep description.
//!
//! ```json
//! {
//!   "datasets": [{ "name": "abalone", "kind": "csv", "path": "data/abalone.csv" }],
//!   "strategies": ["adaptive", "random", "max_entropy", "kmedoids"],
//!   "balancing": { "b": 20, "c": 0.0, "t1": 0, "t2": 5 },
//!   "initial_labeled": 4,
//!   "iterations": 20,
//!   "runs": 50,
//!   "base_seed": 0,
//!   "output_dir": "results"
//! }
//! ```
//!
//! Relative dataset paths and `output_dir` resolve against the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use adabal_core::dataset::manifest::DatasetEntry;
use adabal_core::engine::{ExperimentConfig, SessionConfig, SessionMode};
use adabal_core::strategies::{BalancingParams, StrategyKind};

use crate::CliError;

fn default_initial_labeled() -> usize {
    4
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_iterations() -> usize {
    20
}
fn default_runs() -> usize {
    50
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emit {
    #[serde(default = "yes")]
    pub jsonl: bool,
    #[serde(default = "yes")]
    pub csv: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self { jsonl: true, csv: true }
    }
}

/// Every (dataset, strategy) pair is run `runs` times; run `r` uses seed
/// `base_seed + r` for every strategy, so curves are paired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub datasets: Vec<DatasetEntry>,
    pub strategies: Vec<StrategyKind>,
    #[serde(default)]
    pub balancing: BalancingParams,
    #[serde(default = "default_initial_labeled")]
    pub initial_labeled: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit: Emit,
}

impl RunManifest {
    /// Parses and validates a manifest file.
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        let manifest: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid manifest {}: {e}", path.display())))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.datasets.is_empty() {
            return fail("manifest lists no datasets".into());
        }
        if self.strategies.is_empty() {
            return fail("manifest lists no strategies".into());
        }
        let mut names = BTreeSet::new();
        if let Some(dup) = self.datasets.iter().find(|d| !names.insert(d.name.as_str())) {
            return fail(format!("dataset '{}' is listed twice", dup.name));
        }
        let mut kinds = BTreeSet::new();
        if let Some(dup) = self.strategies.iter().find(|s| !kinds.insert(s.name())) {
            return fail(format!("strategy '{dup}' is listed twice"));
        }
        if self.iterations == 0 {
            return fail("iterations must be at least 1".into());
        }
        if !self.emit.jsonl && !self.emit.csv {
            return fail("emit must enable jsonl or csv".into());
        }
        for strategy in &self.strategies {
            self.experiment(&self.datasets[0].name, *strategy).validate().map_err(CliError::config)?;
        }
        Ok(())
    }

    pub fn session_config(&self, strategy: StrategyKind) -> SessionConfig {
        SessionConfig {
            strategy,
            balancing: self.balancing,
            initial_labeled: self.initial_labeled,
            mode: SessionMode::Replay,
            test_fraction: self.test_fraction,
            ..SessionConfig::default()
        }
    }

    pub fn experiment(&self, dataset: &str, strategy: StrategyKind) -> ExperimentConfig {
        ExperimentConfig {
            dataset: dataset.to_string(),
            session: self.session_config(strategy),
            iterations: self.iterations,
            runs: self.runs,
            base_seed: self.base_seed,
        }
    }

    pub fn seed_for(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }
}

/// Directory that relative paths in the manifest at `path` resolve against.
pub fn base_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

//! JSON descriptions of where datasets come from.
//!
//! ```json
//! { "datasets": [
//!     { "name": "abalone", "kind": "csv", "path": "abalone.csv",
//!       "label_column": "label", "anomaly_value": "1",
//!       "expected": { "n": 1920, "d": 9, "anomalies": 29 } },
//!     { "name": "blobs", "kind": "synthetic", "seed": 3, "spec": { ... } }
//! ] }
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_csv, make_synthetic, Dataset, SyntheticSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCounts {
    pub n: usize,
    pub d: usize,
    pub anomalies: usize,
    /// Relative tolerance on `n` and `anomalies`; `d` must match exactly.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    0.02
}

impl ExpectedCounts {
    pub fn new(n: usize, d: usize, anomalies: usize) -> Self {
        Self { n, d, anomalies, tolerance: default_tolerance() }
    }

    /// Lists every field that falls outside tolerance; empty when the dataset conforms.
    pub fn check(&self, ds: &Dataset) -> Vec<CountMismatch> {
        let mut out = Vec::new();
        let within = |got: usize, want: usize| (got as f64 - want as f64).abs() <= self.tolerance * want as f64;
        if ds.d() != self.d {
            out.push(CountMismatch::new("d", self.d, ds.d()));
        }
        if !within(ds.n(), self.n) {
            out.push(CountMismatch::new("n", self.n, ds.n()));
        }
        if !within(ds.anomaly_count(), self.anomalies) {
            out.push(CountMismatch::new("anomalies", self.anomalies, ds.anomaly_count()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountMismatch {
    pub field: &'static str,
    pub expected: usize,
    pub got: usize,
}

impl CountMismatch {
    fn new(field: &'static str, expected: usize, got: usize) -> Self {
        Self { field, expected, got }
    }
}

impl fmt::Display for CountMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {}, got {}", self.field, self.expected, self.got)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: String,
        #[serde(default = "default_anomaly_value")]
        anomaly_value: String,
        #[serde(default)]
        expected: Option<ExpectedCounts>,
    },
    Synthetic {
        spec: SyntheticSpec,
        #[serde(default)]
        seed: u64,
    },
}

fn default_label_column() -> String {
    "label".into()
}

fn default_anomaly_value() -> String {
    "1".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    #[serde(flatten)]
    pub source: DatasetSource,
}

impl DatasetEntry {
    /// Materializes the raw (unstandardized) dataset. Relative CSV paths are
    /// resolved against `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<Dataset> {
        let mut ds = match &self.source {
            DatasetSource::Csv { path, label_column, anomaly_value, expected } => {
                let path = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                let ds = load_csv(&path, label_column, anomaly_value)?;
                if let Some(expected) = expected {
                    let problems = expected.check(&ds);
                    if !problems.is_empty() {
                        let report: Vec<String> = problems.iter().map(ToString::to_string).collect();
                        return Err(Error::Parse {
                            path,
                            message: format!("count check failed: {}", report.join("; ")),
                        });
                    }
                }
                ds
            }
            DatasetSource::Synthetic { spec, seed } => make_synthetic(spec, *seed)?,
        };
        ds.name = self.name.clone();
        Ok(ds)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub datasets: Vec<DatasetEntry>,
}

impl DatasetManifest {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn get(&self, name: &str) -> Option<&DatasetEntry> {
        self.datasets.iter().find(|e| e.name == name)
    }
}

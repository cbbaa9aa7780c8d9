use std::path::Path;

use adabal_core::dataset::manifest::{DatasetEntry, DatasetManifest, DatasetSource};
use adabal_core::dataset::prepare::{prepare, UciDataset};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct PrepareReport {
    pub entry: DatasetEntry,
    pub n: usize,
    pub d: usize,
    pub anomalies: usize,
}

/// The `prepare` subcommand. Writes the canonical CSV to `out`; fails with a
/// per-field report when the counts miss the published ones. With `manifest`,
/// the entry is added to (or replaces its namesake in) that dataset manifest.
pub fn prepare_dataset(name: &str, raw: &Path, out: &Path, manifest: Option<&Path>) -> Result<PrepareReport, CliError> {
    let kind: UciDataset = name.parse().map_err(CliError::config)?;
    let prepared = prepare(kind, raw, out).map_err(CliError::data)?;
    if !prepared.mismatches.is_empty() {
        let tolerance = kind.expected().tolerance;
        let lines: Vec<String> = prepared.mismatches.iter().map(|m| format!("  {m}")).collect();
        return Err(CliError::Data(format!(
            "{} counts outside the {:.0}% tolerance:\n{}",
            kind.name(),
            tolerance * 100.0,
            lines.join("\n")
        )));
    }
    let mut entry = prepared.entry;
    if let Some(manifest) = manifest {
        entry = record_entry(manifest, entry, out)?;
    }
    Ok(PrepareReport {
        entry,
        n: prepared.dataset.n(),
        d: prepared.dataset.d(),
        anomalies: prepared.dataset.anomaly_count(),
    })
}

fn record_entry(manifest: &Path, mut entry: DatasetEntry, out: &Path) -> Result<DatasetEntry, CliError> {
    let mut doc = if manifest.exists() {
        DatasetManifest::from_path(manifest).map_err(CliError::config)?
    } else {
        DatasetManifest::default()
    };
    let same_dir = manifest.parent().unwrap_or(Path::new("")) == out.parent().unwrap_or(Path::new(""));
    if !same_dir {
        if let DatasetSource::Csv { path, .. } = &mut entry.source {
            *path = std::path::absolute(out).map_err(CliError::data)?;
        }
    }
    match doc.datasets.iter_mut().find(|e| e.name == entry.name) {
        Some(existing) => *existing = entry.clone(),
        None => doc.datasets.push(entry.clone()),
    }
    let text = serde_json::to_string_pretty(&doc).map_err(CliError::runtime)?;
    std::fs::write(manifest, text + "\n")
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", manifest.display())))?;
    Ok(entry)
}

//! Executes a run manifest and writes its result files.
//!
//! Output directory layout:
//! * `results.jsonl`, `results.csv`: one row per (dataset, strategy, run, iteration).
//! * `curves.csv`: per-iteration means and 95% intervals over runs.
//! * `timings.json`: wall-clock times. The only file that differs between reruns.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use adabal_core::dataset::{standardize, Dataset};
use adabal_core::engine::{run_session, RunSeries};
use adabal_core::metrics::{aggregate, to_csv, to_jsonl, ResultRow};
use adabal_core::strategies::StrategyKind;

use crate::manifest::{base_dir, RunManifest};
use crate::CliError;

pub const RESULTS_JSONL: &str = "results.jsonl";
pub const RESULTS_CSV: &str = "results.csv";
pub const CURVES_CSV: &str = "curves.csv";
pub const TIMINGS_JSON: &str = "timings.json";

/// One (dataset, strategy, run) unit of work.
#[derive(Debug, Clone)]
pub struct Cell {
    pub dataset: usize,
    pub strategy: StrategyKind,
    pub run: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub dataset: String,
    pub strategy: StrategyKind,
    pub series: RunSeries,
    pub elapsed_ms: f64,
}

/// Loads every dataset named in the manifest. Relative paths resolve against `base`.
pub fn load_datasets(manifest: &RunManifest, base: &Path) -> Result<Vec<Dataset>, CliError> {
    manifest
        .datasets
        .iter()
        .map(|entry| {
            let ds = entry.load(base).map_err(|e| CliError::Data(format!("dataset '{}': {e}", entry.name)))?;
            let anomalies = ds.anomaly_count();
            if anomalies == 0 || anomalies == ds.n() {
                return Err(CliError::Data(format!("dataset '{}' needs both classes", entry.name)));
            }
            Ok(ds)
        })
        .collect()
}

/// Cells in output order: dataset, then strategy, then run.
pub fn plan(manifest: &RunManifest) -> Vec<Cell> {
    let mut cells = Vec::new();
    for dataset in 0..manifest.datasets.len() {
        for &strategy in &manifest.strategies {
            for run in 0..manifest.runs {
                cells.push(Cell { dataset, strategy, run, seed: manifest.seed_for(run) });
            }
        }
    }
    cells
}

/// Runs every cell on a pool of `workers` threads. Results come back in
/// [`plan`] order whatever the scheduling.
pub fn execute(manifest: &RunManifest, datasets: &[Dataset], workers: usize) -> Result<Vec<CellResult>, CliError> {
    let standardized: Vec<Dataset> = datasets.iter().map(standardize).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().map_err(CliError::runtime)?;
    let cells = plan(manifest);
    pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let ds = &standardized[cell.dataset];
                let config = manifest.session_config(cell.strategy);
                let start = Instant::now();
                let series = run_session(ds, &config, manifest.iterations, cell.run, cell.seed).map_err(|e| {
                    CliError::Runtime(format!("{} / {} / run {}: {e}", ds.name, cell.strategy, cell.run))
                })?;
                log::debug!("finished {} / {} / run {}", ds.name, cell.strategy, cell.run);
                Ok(CellResult {
                    dataset: ds.name.clone(),
                    strategy: cell.strategy,
                    series,
                    elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
                })
            })
            .collect()
    })
}

pub fn result_rows(results: &[CellResult]) -> Vec<ResultRow> {
    results
        .iter()
        .flat_map(|c| {
            c.series.records.iter().map(move |r| {
                ResultRow::new(&c.dataset, c.strategy.name(), c.series.run, c.series.seed, c.series.truncated, r)
            })
        })
        .collect()
}

/// One point of an aggregated learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub dataset: String,
    pub strategy: String,
    pub metric: String,
    pub iteration: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_runs: usize,
    pub padded_runs: usize,
}

pub const CURVE_METRICS: [&str; 2] = ["prauc", "anomalies_discovered"];

/// Aggregates results per (dataset, strategy): PRAUC clipped to [0, 1] and the
/// discovery count.
pub fn curves(results: &[CellResult]) -> Result<Vec<CurveRow>, CliError> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < results.len() {
        let key = (&results[start].dataset, results[start].strategy);
        let end = start + results[start..].iter().take_while(|c| (&c.dataset, c.strategy) == key).count();
        let group = &results[start..end];
        for metric in CURVE_METRICS {
            let series: Vec<Vec<f64>> = group
                .iter()
                .map(|c| {
                    c.series
                        .records
                        .iter()
                        .map(|r| match metric {
                            "prauc" => r.prauc.unwrap_or(f64::NAN),
                            _ => r.anomalies_discovered as f64,
                        })
                        .collect()
                })
                .collect();
            let bounds = (metric == "prauc").then_some((0.0, 1.0));
            let curve = aggregate(&series, bounds).map_err(CliError::runtime)?;
            out.extend(curve.points.into_iter().map(|p| CurveRow {
                dataset: key.0.clone(),
                strategy: key.1.name().to_string(),
                metric: metric.to_string(),
                iteration: p.iteration,
                mean: p.mean,
                ci_low: p.ci_low,
                ci_high: p.ci_high,
                n_runs: p.n_runs,
                padded_runs: p.padded_runs,
            }));
        }
        start = end;
    }
    Ok(out)
}

pub fn curves_csv(rows: &[CurveRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(CliError::runtime)?;
    }
    let bytes = w.into_inner().map_err(CliError::runtime)?;
    String::from_utf8(bytes).map_err(CliError::runtime)
}

/// Final-iteration PRAUC and discovery per (dataset, strategy) as an aligned text table.
pub fn summary_table(curves: &[CurveRow]) -> String {
    let last = |metric: &str, ds: &str, st: &str| {
        curves.iter().rev().find(|c| c.metric == metric && c.dataset == ds && c.strategy == st)
    };
    let mut lines = vec![format!(
        "{:<20} {:<12} {:>5} {:>8} {:>19} {:>10}",
        "dataset", "strategy", "iter", "prauc", "95% ci", "found"
    )];
    let mut seen = Vec::new();
    for c in curves {
        if seen.contains(&(&c.dataset, &c.strategy)) {
            continue;
        }
        seen.push((&c.dataset, &c.strategy));
        let p = last("prauc", &c.dataset, &c.strategy).expect("prauc curve present");
        let found = last("anomalies_discovered", &c.dataset, &c.strategy).expect("discovery curve present");
        lines.push(format!(
            "{:<20} {:<12} {:>5} {:>8.4} {:>19} {:>10.2}",
            c.dataset,
            c.strategy,
            p.iteration,
            p.mean,
            format!("[{:.4}, {:.4}]", p.ci_low, p.ci_high),
            found.mean
        ));
    }
    lines.join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub dataset: String,
    pub strategy: String,
    pub run: usize,
    pub elapsed_ms: f64,
    pub iteration_ms: Vec<f64>,
}

/// Wall-clock sidecar, kept apart so the result files stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub started_unix_ms: u128,
    pub total_ms: f64,
    pub workers: usize,
    pub cells: Vec<CellTiming>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub cells: usize,
}

fn write(path: &Path, body: &str) -> Result<PathBuf, CliError> {
    std::fs::write(path, body).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

/// The `run` subcommand: load, execute, write, summarize.
pub fn run_manifest(path: &Path, out_override: Option<&Path>, workers: usize) -> Result<RunReport, CliError> {
    let manifest = RunManifest::from_path(path)?;
    let base = base_dir(path);
    let out_dir = match out_override {
        Some(p) => p.to_path_buf(),
        None if manifest.output_dir.is_absolute() => manifest.output_dir.clone(),
        None => base.join(&manifest.output_dir),
    };
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("output directory {} is not writable: {e}", out_dir.display())))?;
    let datasets = load_datasets(&manifest, &base)?;

    let started_unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    let clock = Instant::now();
    let results = execute(&manifest, &datasets, workers)?;
    let total_ms = clock.elapsed().as_secs_f64() * 1e3;

    let rows = result_rows(&results);
    let curve_rows = curves(&results)?;
    let mut files = Vec::new();
    if manifest.emit.jsonl {
        files.push(write(&out_dir.join(RESULTS_JSONL), &to_jsonl(&rows).map_err(CliError::runtime)?)?);
    }
    if manifest.emit.csv {
        files.push(write(&out_dir.join(RESULTS_CSV), &to_csv(&rows))?);
    }
    files.push(write(&out_dir.join(CURVES_CSV), &curves_csv(&curve_rows)?)?);
    let timings = Timings {
        started_unix_ms,
        total_ms,
        workers,
        cells: results
            .iter()
            .map(|c| CellTiming {
                dataset: c.dataset.clone(),
                strategy: c.strategy.name().to_string(),
                run: c.series.run,
                elapsed_ms: c.elapsed_ms,
                iteration_ms: c.series.records.iter().map(|r| r.wall_time_ms).collect(),
            })
            .collect(),
    };
    files
        .push(write(&out_dir.join(TIMINGS_JSON), &serde_json::to_string_pretty(&timings).map_err(CliError::runtime)?)?);
    Ok(RunReport { out_dir, files, summary: summary_table(&curve_rows), cells: results.len() })
}

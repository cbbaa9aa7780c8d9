//! Ranking quality, discovery counts and multi-run aggregation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// One evaluation point of a run. `prauc` is absent when no ground truth is
/// held out (human sessions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iteration: usize,
    pub labels_used: usize,
    pub prauc: Option<f64>,
    pub anomalies_discovered: usize,
    pub wall_time_ms: f64,
}

/// Average precision with the anomaly class (`1`) as positive. Tied scores form
/// a single threshold.
pub fn prauc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidLabel(bad as i64));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (mut tp, mut seen, mut ap, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut start = 0;
    while start < order.len() {
        let score = scores[order[start]];
        let mut end = start;
        while end < order.len() && scores[order[end]] == score {
            tp += labels[order[end]] as usize;
            end += 1;
        }
        seen = end;
        let recall = tp as f64 / positives as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
        start = end;
    }
    debug_assert_eq!(seen, scores.len());
    Ok(ap)
}

/// Number of labeled indices whose true label is an anomaly.
pub fn discovery_count<I>(labeled: I, truth: &[u8]) -> Result<usize>
where
    I: IntoIterator<Item = usize>,
{
    let mut count = 0;
    for i in labeled {
        match truth.get(i) {
            Some(&l) => count += (l == 1) as usize,
            None => return Err(Error::invalid(format!("labeled index {i} out of range"))),
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub iteration: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_runs: usize,
    /// Runs that had ended before this point and contribute their last value.
    pub padded_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub points: Vec<AggregatePoint>,
    /// Set when only one run was supplied; the interval collapses to the mean.
    pub degenerate: bool,
}

/// Per-iteration mean with a 95% Student-t interval over runs. Shorter runs are
/// padded with their last value. `bounds` clips the interval (e.g. `(0, 1)`
/// for PRAUC).
pub fn aggregate(series: &[Vec<f64>], bounds: Option<(f64, f64)>) -> Result<AggregateCurve> {
    if series.is_empty() {
        return Err(Error::invalid("aggregate needs at least one run"));
    }
    if series.iter().any(|s| s.is_empty()) {
        return Err(Error::invalid("every run needs at least one value"));
    }
    if series.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("aggregated values must be finite"));
    }
    let n = series.len();
    let len = series.iter().map(Vec::len).max().unwrap_or(0);
    let t_crit = if n >= 2 {
        StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::Numerical(e.to_string()))?.inverse_cdf(0.975)
    } else {
        0.0
    };
    let points = (0..len)
        .map(|it| {
            let values: Vec<f64> = series.iter().map(|s| *s.get(it).unwrap_or_else(|| s.last().unwrap())).collect();
            let padded_runs = series.iter().filter(|s| s.len() <= it).count();
            let mean = values.iter().sum::<f64>() / n as f64;
            let half = if n >= 2 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                t_crit * (var / n as f64).sqrt()
            } else {
                0.0
            };
            let (mut lo, mut hi) = (mean - half, mean + half);
            if let Some((a, b)) = bounds {
                lo = lo.max(a);
                hi = hi.min(b);
            }
            AggregatePoint { iteration: it, mean, ci_low: lo.min(mean), ci_high: hi.max(mean), n_runs: n, padded_runs }
        })
        .collect();
    Ok(AggregateCurve { points, degenerate: n < 2 })
}

/// One line of the results file: a metrics record tagged with its cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRow {
    pub dataset: String,
    pub strategy: String,
    pub run: usize,
    pub seed: u64,
    pub iteration: usize,
    pub labels_used: usize,
    pub prauc: Option<f64>,
    pub anomalies_discovered: usize,
    /// The unlabeled pool ran out before the iteration budget.
    pub run_truncated: bool,
}

impl ResultRow {
    pub fn new(dataset: &str, strategy: &str, run: usize, seed: u64, truncated: bool, r: &MetricsRecord) -> Self {
        Self {
            dataset: dataset.to_string(),
            strategy: strategy.to_string(),
            run,
            seed,
            iteration: r.iteration,
            labels_used: r.labels_used,
            prauc: r.prauc,
            anomalies_discovered: r.anomalies_discovered,
            run_truncated: truncated,
        }
    }
}

pub const CSV_HEADER: &str = "dataset,strategy,run,seed,iteration,labels_used,prauc,anomalies_discovered,run_truncated";

/// One JSON object per line.
pub fn to_jsonl(rows: &[ResultRow]) -> Result<String> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row)?);
        out.push('\n');
    }
    Ok(out)
}

/// Tidy CSV, one row per record. A missing PRAUC is an empty cell.
pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        let prauc = r.prauc.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            csv_field(&r.dataset),
            csv_field(&r.strategy),
            r.run,
            r.seed,
            r.iteration,
            r.labels_used,
            prauc,
            r.anomalies_discovered,
            r.run_truncated
        ));
    }
    out
}

pub fn write_jsonl(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_file(path, to_jsonl(rows)?.as_bytes())
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_file(path, to_csv(rows).as_bytes())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Summary of a validated results file.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub rows: usize,
    pub series: usize,
}

/// Validates a results file: every line is a well-formed row, and every
/// (dataset, strategy, run) series starts at iteration 0, advances by one,
/// keeps `labels_used` increasing and `anomalies_discovered` non-decreasing.
pub fn check_results_jsonl(text: &str) -> Result<CheckReport> {
    let mut series: BTreeMap<(String, String, usize), Vec<ResultRow>> = BTreeMap::new();
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let fail =
            |msg: String| Error::Parse { path: Default::default(), message: format!("line {}: {msg}", lineno + 1) };
        if line.trim().is_empty() {
            return Err(fail("blank line".into()));
        }
        let row: ResultRow = serde_json::from_str(line).map_err(|e| fail(e.to_string()))?;
        if let Some(p) = row.prauc {
            if !(0.0..=1.0).contains(&p) {
                return Err(fail(format!("prauc {p} outside [0, 1]")));
            }
        }
        if row.anomalies_discovered > row.labels_used {
            return Err(fail("more anomalies discovered than labels used".into()));
        }
        series.entry((row.dataset.clone(), row.strategy.clone(), row.run)).or_default().push(row);
        rows += 1;
    }
    for ((dataset, strategy, run), rs) in &series {
        let bad = |msg: &str| Error::Parse {
            path: Default::default(),
            message: format!("series {dataset}/{strategy}/run {run}: {msg}"),
        };
        if rs[0].iteration != 0 {
            return Err(bad("does not start at iteration 0"));
        }
        if rs.iter().any(|r| r.seed != rs[0].seed || r.run_truncated != rs[0].run_truncated) {
            return Err(bad("seed or truncation flag changes within the series"));
        }
        for w in rs.windows(2) {
            if w[1].iteration != w[0].iteration + 1 {
                return Err(bad("iterations are not consecutive"));
            }
            if w[1].labels_used <= w[0].labels_used {
                return Err(bad("labels_used does not increase"));
            }
            if w[1].anomalies_discovered < w[0].anomalies_discovered {
                return Err(bad("anomalies_discovered decreases"));
            }
        }
    }
    Ok(CheckReport { rows, series: series.len() })
}

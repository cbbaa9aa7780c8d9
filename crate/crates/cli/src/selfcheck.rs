//! Validation of a results directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use adabal_core::metrics::{check_results_jsonl, to_csv, ResultRow};

use crate::runner::{CurveRow, Timings, CURVES_CSV, CURVE_METRICS, RESULTS_CSV, TIMINGS_JSON};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct SelfCheckReport {
    pub rows: usize,
    pub series: usize,
    pub checked: Vec<PathBuf>,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

/// Checks `results.jsonl` and whichever sibling files exist: the CSV must be
/// the exact rendering of the JSONL rows, the curves must parse with ordered
/// intervals for every series key, and the timing sidecar must parse.
pub fn selfcheck(jsonl: &Path) -> Result<SelfCheckReport, CliError> {
    let text = read(jsonl)?;
    let report = check_results_jsonl(&text).map_err(|e| CliError::Data(format!("{}: {e}", jsonl.display())))?;
    let rows: Vec<ResultRow> =
        text.lines().map(serde_json::from_str).collect::<Result<_, _>>().map_err(CliError::data)?;
    let mut checked = vec![jsonl.to_path_buf()];
    let dir = jsonl.parent().unwrap_or(Path::new("."));

    let csv_path = dir.join(RESULTS_CSV);
    if csv_path.exists() {
        if read(&csv_path)? != to_csv(&rows) {
            return Err(CliError::Data(format!("{} does not match {}", csv_path.display(), jsonl.display())));
        }
        checked.push(csv_path);
    }

    let curves_path = dir.join(CURVES_CSV);
    if curves_path.exists() {
        let mut reader = csv::Reader::from_path(&curves_path).map_err(CliError::data)?;
        let mut keys = BTreeSet::new();
        for (i, row) in reader.deserialize::<CurveRow>().enumerate() {
            let row = row.map_err(|e| CliError::Data(format!("{} row {}: {e}", curves_path.display(), i + 1)))?;
            let ordered = row.ci_low <= row.mean && row.mean <= row.ci_high;
            if !ordered || !CURVE_METRICS.contains(&row.metric.as_str()) || row.n_runs == 0 {
                return Err(CliError::Data(format!("{} row {}: invalid values", curves_path.display(), i + 1)));
            }
            keys.insert((row.dataset, row.strategy));
        }
        let expected: BTreeSet<(String, String)> =
            rows.iter().map(|r| (r.dataset.clone(), r.strategy.clone())).collect();
        if keys != expected {
            return Err(CliError::Data(format!("{} covers different series than the results", curves_path.display())));
        }
        checked.push(curves_path);
    }

    let timings_path = dir.join(TIMINGS_JSON);
    if timings_path.exists() {
        let timings: Timings = serde_json::from_str(&read(&timings_path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", timings_path.display())))?;
        if timings.cells.len() != report.series {
            return Err(CliError::Data(format!(
                "{} lists {} cells, expected {}",
                timings_path.display(),
                timings.cells.len(),
                report.series
            )));
        }
        checked.push(timings_path);
    }
    Ok(SelfCheckReport { rows: report.rows, series: report.series, checked })
}

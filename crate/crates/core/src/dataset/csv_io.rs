use std::path::Path;

use ndarray::Array2;

use super::{Dataset, ANOMALY};
use crate::{Error, Result};

fn parse_err(path: &Path, message: String) -> Error {
    Error::Parse { path: path.to_path_buf(), message }
}

/// Reads a headed CSV. Every column except `label_column` must parse as a real;
/// rows whose label cell equals `anomaly_value` become anomalies.
pub fn load_csv(path: &Path, label_column: &str, anomaly_value: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path).map_err(|e| {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io { path: path.to_path_buf(), source },
            other => parse_err(path, format!("{other:?}")),
        }
    })?;
    let headers = reader.headers().map_err(|e| parse_err(path, e.to_string()))?.clone();
    let label_idx =
        headers.iter().position(|h| h == label_column).ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let d = headers.len() - 1;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        // Row numbers reported 1-based and counting the header line.
        let line = row + 2;
        let record = record.map_err(|e| parse_err(path, format!("line {line}: {e}")))?;
        if record.len() != headers.len() {
            return Err(parse_err(
                path,
                format!("line {line}: expected {} cells, got {}", headers.len(), record.len()),
            ));
        }
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                labels.push(u8::from(cell == anomaly_value));
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(path, format!("line {line}, column `{}`: cannot parse {cell:?} as a number", &headers[col]))
            })?;
            values.push(v);
        }
    }

    let n = labels.len();
    let features = Array2::from_shape_vec((n, d), values).map_err(|e| parse_err(path, e.to_string()))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ds = Dataset::new(name, features, labels)?;
    let anomalies = ds.anomaly_count();
    if anomalies == 0 || anomalies == ds.n() {
        log::warn!("{}: only one class present ({anomalies} anomalies of {})", path.display(), ds.n());
    }
    Ok(ds)
}

/// Writes `ds` with the given feature header and a trailing `label` column (0/1).
pub fn write_csv(ds: &Dataset, feature_names: &[String], path: &Path) -> Result<()> {
    if feature_names.len() != ds.d() {
        return Err(Error::DimensionMismatch { expected: ds.d(), got: feature_names.len() });
    }
    let io_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.to_path_buf(), source },
        other => parse_err(path, format!("{other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    let mut header: Vec<&str> = feature_names.iter().map(String::as_str).collect();
    header.push("label");
    w.write_record(&header).map_err(io_err)?;
    for (row, &label) in ds.features.rows().into_iter().zip(&ds.labels) {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        cells.push(if label == ANOMALY { "1" } else { "0" }.to_string());
        w.write_record(&cells).map_err(io_err)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

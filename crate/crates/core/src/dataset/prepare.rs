//! Conversion of raw UCI benchmark files into canonical labeled CSVs.
//!
//! Conventions:
//! * `abalone` (`abalone.data`): rings 8, 9 and 10 are normal, rings 3 and 21 are
//!   anomalies, all other rows dropped. Sex becomes two indicators (M, F; infant is
//!   the baseline) followed by the seven physical measurements: 9 features.
//! * `thyroid` (`ann-test.data`): class 3 is normal, class 1 anomalous, class 2 dropped;
//!   21 features.
//! * `cardiotocography` (CSV export of the CTG raw-data sheet): NSP 1 is normal; 45 of
//!   the NSP 3 (pathologic) rows are kept as anomalies, picked with a fixed seed;
//!   NSP 2 dropped. Features: LBE plus the 21 standard measurements.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::IndexedRandom;

use super::manifest::{CountMismatch, DatasetEntry, DatasetSource, ExpectedCounts};
use super::{write_csv, Dataset};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UciDataset {
    Abalone,
    Thyroid,
    Cardiotocography,
}

impl FromStr for UciDataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "abalone" => Ok(Self::Abalone),
            "thyroid" | "ann-thyroid" | "ann-thyroid-1v3" => Ok(Self::Thyroid),
            "cardiotocography" | "ctg" => Ok(Self::Cardiotocography),
            other => Err(Error::invalid(format!(
                "unknown dataset `{other}` (expected abalone, thyroid or cardiotocography)"
            ))),
        }
    }
}

impl UciDataset {
    pub fn name(self) -> &'static str {
        match self {
            Self::Abalone => "abalone",
            Self::Thyroid => "thyroid",
            Self::Cardiotocography => "cardiotocography",
        }
    }

    /// Published row, feature and anomaly counts for the prepared files.
    pub fn expected(self) -> ExpectedCounts {
        match self {
            Self::Abalone => ExpectedCounts::new(1920, 9, 29),
            Self::Thyroid => ExpectedCounts::new(3251, 21, 73),
            Self::Cardiotocography => ExpectedCounts::new(1700, 22, 45),
        }
    }
}

const CTG_FEATURES: [&str; 22] = [
    "LBE", "LB", "AC", "FM", "UC", "DL", "DS", "DP", "ASTV", "MSTV", "ALTV", "MLTV", "Width", "Min", "Max", "Nmax",
    "Nzeros", "Mode", "Mean", "Median", "Variance", "Tendency",
];
const CTG_ANOMALIES: usize = 45;

pub struct Prepared {
    pub dataset: Dataset,
    pub feature_names: Vec<String>,
    pub entry: DatasetEntry,
    pub mismatches: Vec<CountMismatch>,
}

/// Feature rows, labels and feature names.
type Table = (Vec<Vec<f64>>, Vec<u8>, Vec<String>);

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn bad(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), message: format!("line {line}: {}", msg.into()) }
}

fn num(path: &Path, line: usize, cell: &str) -> Result<f64> {
    cell.trim().parse().map_err(|_| bad(path, line, format!("cannot parse {cell:?}")))
}

fn abalone(raw: &Path) -> Result<Table> {
    let text = read(raw)?;
    let (mut rows, mut labels) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 9 {
            return Err(bad(raw, i + 1, format!("expected 9 fields, got {}", cells.len())));
        }
        let rings = num(raw, i + 1, cells[8])? as i64;
        let label = match rings {
            8..=10 => 0,
            3 | 21 => 1,
            _ => continue,
        };
        let mut x = vec![f64::from(cells[0] == "M"), f64::from(cells[0] == "F")];
        for c in &cells[1..8] {
            x.push(num(raw, i + 1, c)?);
        }
        rows.push(x);
        labels.push(label);
    }
    let names = [
        "sex_m",
        "sex_f",
        "length",
        "diameter",
        "height",
        "whole_weight",
        "shucked_weight",
        "viscera_weight",
        "shell_weight",
    ];
    Ok((rows, labels, names.iter().map(|s| s.to_string()).collect()))
}

fn thyroid(raw: &Path) -> Result<Table> {
    let text = read(raw)?;
    let (mut rows, mut labels) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split_whitespace().collect();
        if cells.len() != 22 {
            return Err(bad(raw, i + 1, format!("expected 22 fields, got {}", cells.len())));
        }
        let label = match num(raw, i + 1, cells[21])? as i64 {
            3 => 0,
            1 => 1,
            _ => continue,
        };
        rows.push(cells[..21].iter().map(|c| num(raw, i + 1, c)).collect::<Result<Vec<_>>>()?);
        labels.push(label);
    }
    Ok((rows, labels, (1..=21).map(|j| format!("a{j}")).collect()))
}

fn cardiotocography(raw: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(raw)
        .map_err(|e| bad(raw, 1, e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(raw, 1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let feature_cols = CTG_FEATURES.iter().map(|n| col(n)).collect::<Result<Vec<_>>>()?;
    let nsp_col = col("NSP")?;

    let (mut normals, mut pathologic) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| bad(raw, line, e.to_string()))?;
        let nsp = record.get(nsp_col).unwrap_or("").trim();
        if nsp.is_empty() {
            continue; // trailing blank rows of spreadsheet exports
        }
        let x =
            feature_cols.iter().map(|&c| num(raw, line, record.get(c).unwrap_or(""))).collect::<Result<Vec<_>>>()?;
        match num(raw, line, nsp)? as i64 {
            1 => normals.push((i, x)),
            3 => pathologic.push((i, x)),
            _ => {}
        }
    }
    let mut rng = rng::seeded(0);
    let keep = CTG_ANOMALIES.min(pathologic.len());
    let mut chosen: Vec<&(usize, Vec<f64>)> = pathologic.choose_multiple(&mut rng, keep).collect();
    chosen.sort_by_key(|(i, _)| *i);

    let mut all: Vec<(usize, Vec<f64>, u8)> = normals.into_iter().map(|(i, x)| (i, x, 0)).collect();
    all.extend(chosen.into_iter().map(|(i, x)| (*i, x.clone(), 1)));
    all.sort_by_key(|(i, _, _)| *i);
    let labels = all.iter().map(|r| r.2).collect();
    let rows = all.into_iter().map(|r| r.1).collect();
    Ok((rows, labels, CTG_FEATURES.iter().map(|s| s.to_string()).collect()))
}

/// Converts `raw` into a canonical CSV at `out` and returns the manifest entry
/// together with any count deviations from the published figures.
pub fn prepare(kind: UciDataset, raw: &Path, out: &Path) -> Result<Prepared> {
    let (rows, labels, feature_names) = match kind {
        UciDataset::Abalone => abalone(raw)?,
        UciDataset::Thyroid => thyroid(raw)?,
        UciDataset::Cardiotocography => cardiotocography(raw)?,
    };
    let d = feature_names.len();
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let features = Array2::from_shape_vec((n, d), flat)
        .map_err(|e| Error::Parse { path: raw.to_path_buf(), message: e.to_string() })?;
    let dataset = Dataset::new(kind.name(), features, labels)?;
    write_csv(&dataset, &feature_names, out)?;

    let expected = kind.expected();
    let mismatches = expected.check(&dataset);
    let entry = DatasetEntry {
        name: kind.name().to_string(),
        source: DatasetSource::Csv {
            path: out.file_name().map(PathBuf::from).unwrap_or_else(|| out.to_path_buf()),
            label_column: "label".into(),
            anomaly_value: "1".into(),
            expected: Some(expected),
        },
    };
    Ok(Prepared { dataset, feature_names, entry, mismatches })
}

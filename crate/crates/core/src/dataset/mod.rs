//! Labeled datasets: loading, standardization, stratified splitting,
//! labeled-seed selection and synthetic generation.

mod csv_io;
pub mod manifest;
pub mod prepare;
mod synthetic;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

pub use csv_io::{load_csv, write_csv};
pub use synthetic::{make_synthetic, NormalComponent, SyntheticSpec};

pub const NORMAL: u8 = 0;
pub const ANOMALY: u8 = 1;

/// Feature matrix with binary ground truth (`1` = anomaly).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Array2<f64>, labels: Vec<u8>) -> Result<Self> {
        let (n, d) = features.dim();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        if d < 1 {
            return Err(Error::invalid("dataset needs at least one feature column"));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidLabel(bad as i64));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        Ok(Self { name: name.into(), features, labels })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == ANOMALY).count()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Gathers the listed rows into a new matrix.
    pub fn rows(&self, indices: &[usize]) -> Array2<f64> {
        self.features.select(Axis(0), indices)
    }
}

/// Z-scores every column with the population (divide-by-n) standard deviation.
/// Constant columns become all zeros.
pub fn standardize(ds: &Dataset) -> Dataset {
    let mut features = ds.features.clone();
    let n = features.nrows() as f64;
    for mut col in features.columns_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd <= 1e-12 * mean.abs().max(1.0) {
            col.fill(0.0);
        } else {
            col.mapv_inplace(|v| (v - mean) / sd);
        }
    }
    Dataset { name: ds.name.clone(), features, labels: ds.labels.clone() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_members(labels: &[u8], candidates: impl Iterator<Item = usize>) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for i in candidates {
        out[labels[i] as usize].push(i);
    }
    out
}

/// Stratified shuffle split. Per-class test counts follow the largest-remainder
/// allocation of `round(n * test_fraction)`, clamped so that every class keeps at
/// least one member on each side.
pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitResult> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test_fraction must lie in (0, 1), got {test_fraction}")));
    }
    let n = ds.n();
    let mut classes = class_members(&ds.labels, 0..n);
    for (label, members) in classes.iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::InsufficientClass { label: label as u8, needed: 2, available: members.len() });
        }
    }

    let n_test = (n as f64 * test_fraction).round() as usize;
    let exact: Vec<f64> = classes.iter().map(|m| m.len() as f64 * n_test as f64 / n as f64).collect();
    let mut alloc: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut remaining = n_test - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..classes.len()).collect();
    // Largest fractional part first; ties go to the larger class.
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(classes[b].len().cmp(&classes[a].len()))
    });
    for &c in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        alloc[c] += 1;
        remaining -= 1;
    }

    // Every class keeps a member on each side; the largest class absorbs the
    // difference so the test size stays at the target when it can.
    for (k, members) in alloc.iter_mut().zip(&classes) {
        *k = (*k).clamp(1, members.len() - 1);
    }
    let largest = (0..classes.len()).max_by_key(|&c| classes[c].len()).unwrap_or(0);
    let others: usize = (0..classes.len()).filter(|&c| c != largest).map(|c| alloc[c]).sum();
    alloc[largest] = n_test.saturating_sub(others).clamp(1, classes[largest].len() - 1);

    let mut rng = rng::seeded(seed);
    let mut split = SplitResult { train: Vec::with_capacity(n - n_test), test: Vec::with_capacity(n_test) };
    for (members, k) in classes.iter_mut().zip(alloc) {
        members.shuffle(&mut rng);
        split.test.extend_from_slice(&members[..k]);
        split.train.extend_from_slice(&members[k..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Draws `per_class` indices of each class uniformly without replacement.
pub fn init_labeled(ds: &Dataset, per_class: usize, seed: u64) -> Result<Vec<usize>> {
    let all: Vec<usize> = (0..ds.n()).collect();
    init_labeled_within(&ds.labels, &all, per_class, seed)
}

/// Same as [`init_labeled`] but restricted to `candidates` (e.g. the training partition).
pub fn init_labeled_within(labels: &[u8], candidates: &[usize], per_class: usize, seed: u64) -> Result<Vec<usize>> {
    let classes = class_members(labels, candidates.iter().copied());
    let mut rng = rng::seeded(seed);
    let mut out = Vec::with_capacity(2 * per_class);
    for (label, members) in classes.iter().enumerate() {
        if members.len() < per_class {
            return Err(Error::InsufficientClass { label: label as u8, needed: per_class, available: members.len() });
        }
        out.extend(members.choose_multiple(&mut rng, per_class).copied());
    }
    out.sort_unstable();
    Ok(out)
}

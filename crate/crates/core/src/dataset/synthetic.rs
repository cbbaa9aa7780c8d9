use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, ANOMALY, NORMAL};
use crate::rng;
use crate::{Error, Result};

/// Isotropic Gaussian source of normal points: `N(mean, scale² I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalComponent {
    pub mean: Vec<f64>,
    pub scale: f64,
}

/// Generator for labeled test data with a dense normal population, one tight
/// group of anomalies and anomalies scattered through the low-density region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub d: usize,
    pub n_normal: usize,
    pub normal_components: Vec<NormalComponent>,
    pub n_anomaly_cluster: usize,
    /// Minimum distance from the anomaly-cluster center to every normal mean.
    pub anomaly_cluster_offset: f64,
    /// Standard deviation of the anomaly cluster.
    #[serde(default = "default_spread")]
    pub anomaly_cluster_spread: f64,
    pub n_anomaly_scatter: usize,
}

fn default_spread() -> f64 {
    0.3
}

impl SyntheticSpec {
    /// Single unit blob at the origin with a tight offset anomaly group and scattered outliers.
    pub fn single_blob(d: usize, n_normal: usize, n_cluster: usize, n_scatter: usize, offset: f64) -> Self {
        Self {
            d,
            n_normal,
            normal_components: vec![NormalComponent { mean: vec![0.0; d], scale: 1.0 }],
            n_anomaly_cluster: n_cluster,
            anomaly_cluster_offset: offset,
            anomaly_cluster_spread: default_spread(),
            n_anomaly_scatter: n_scatter,
        }
    }

    /// Two-dimensional data shaped like the classic picture of anomalies: two
    /// normal blobs, a compact group of anomalies off to one side and isolated
    /// points in the sparse surroundings. 2% anomalies, 60/40 cluster/scatter.
    pub fn clustered_and_scattered(n: usize) -> Self {
        let anomalies = (n as f64 * 0.02).round() as usize;
        let n_cluster = (anomalies as f64 * 0.6).round() as usize;
        Self {
            d: 2,
            n_normal: n - anomalies,
            normal_components: vec![
                NormalComponent { mean: vec![0.0, 0.0], scale: 1.0 },
                NormalComponent { mean: vec![5.0, 1.0], scale: 0.8 },
            ],
            n_anomaly_cluster: n_cluster,
            anomaly_cluster_offset: 6.0,
            anomaly_cluster_spread: 0.3,
            n_anomaly_scatter: anomalies - n_cluster,
        }
    }

    /// Stand-in for a balanced, 42-feature tabular dataset: 672 rows of which
    /// 418 (62%) are anomalies that overlap partially with the normal population.
    pub fn balanced_standin() -> Self {
        let d = 42;
        let mut shifted = vec![0.0; d];
        shifted[..6].iter_mut().for_each(|v| *v = 1.5);
        Self {
            d,
            n_normal: 254,
            normal_components: vec![
                NormalComponent { mean: vec![0.0; d], scale: 1.0 },
                NormalComponent { mean: shifted, scale: 1.0 },
            ],
            n_anomaly_cluster: 380,
            anomaly_cluster_offset: 3.0,
            anomaly_cluster_spread: 1.0,
            n_anomaly_scatter: 38,
        }
    }

    pub fn n(&self) -> usize {
        self.n_normal + self.n_anomaly_cluster + self.n_anomaly_scatter
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("synthetic spec needs d >= 1"));
        }
        if self.n_anomaly_cluster + self.n_anomaly_scatter == 0 {
            return Err(Error::invalid("synthetic spec needs at least one anomaly"));
        }
        if self.n_normal > 0 && self.normal_components.is_empty() {
            return Err(Error::invalid("normal points requested without components"));
        }
        for c in &self.normal_components {
            if c.mean.len() != self.d {
                return Err(Error::DimensionMismatch { expected: self.d, got: c.mean.len() });
            }
            if !(c.scale > 0.0) {
                return Err(Error::invalid("component scale must be positive"));
            }
        }
        if !(self.anomaly_cluster_offset >= 0.0) || !(self.anomaly_cluster_spread >= 0.0) {
            return Err(Error::invalid("anomaly offset and spread must be non-negative"));
        }
        if self.n() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: self.n() });
        }
        Ok(())
    }

    fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.d];
        let k = self.normal_components.len().max(1) as f64;
        for comp in &self.normal_components {
            for (acc, m) in c.iter_mut().zip(&comp.mean) {
                *acc += m / k;
            }
        }
        c
    }

    /// Center of the anomaly group: pushed from the centroid of the normal means
    /// along the negative diagonal far enough to clear every mean by the offset.
    pub fn anomaly_cluster_center(&self) -> Vec<f64> {
        let centroid = self.centroid();
        let reach = self.normal_components.iter().map(|c| dist(&c.mean, &centroid)).fold(0.0, f64::max);
        let step = (self.anomaly_cluster_offset + reach) / (self.d as f64).sqrt();
        centroid.iter().map(|c| c - step).collect()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Samples a dataset from `spec`. Rows are shuffled so that labels carry no
/// positional signal.
pub fn make_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.d;
    let mut rng = rng::seeded(seed);
    let gauss = |rng: &mut rng::Rng| -> f64 { StandardNormal.sample(rng) };
    let mut rows: Vec<(Vec<f64>, u8)> = Vec::with_capacity(spec.n());

    let k = spec.normal_components.len();
    for i in 0..spec.n_normal {
        let comp = &spec.normal_components[i % k];
        let x = comp.mean.iter().map(|m| m + comp.scale * gauss(&mut rng)).collect();
        rows.push((x, NORMAL));
    }

    let center = spec.anomaly_cluster_center();
    for _ in 0..spec.n_anomaly_cluster {
        let x = center.iter().map(|m| m + spec.anomaly_cluster_spread * gauss(&mut rng)).collect();
        rows.push((x, ANOMALY));
    }

    // Shell around the normal centroid that starts beyond the bulk of every component.
    let centroid = spec.centroid();
    let max_scale = spec.normal_components.iter().map(|c| c.scale).fold(1.0_f64, f64::max);
    let reach = spec.normal_components.iter().map(|c| dist(&c.mean, &centroid)).fold(0.0, f64::max);
    let r_in = reach + max_scale * ((d as f64).sqrt() + 3.0);
    let r_out = r_in + 3.0 * max_scale;
    let (lo, hi) = (r_in.powi(d as i32), r_out.powi(d as i32));
    for _ in 0..spec.n_anomaly_scatter {
        let dir: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let u: f64 = rng.random();
        let r = (lo + u * (hi - lo)).powf(1.0 / d as f64);
        let x = centroid.iter().zip(&dir).map(|(c, v)| c + r * v / norm).collect();
        rows.push((x, ANOMALY));
    }

    rows.shuffle(&mut rng);
    let n = rows.len();
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for (i, (x, y)) in rows.into_iter().enumerate() {
        features.row_mut(i).assign(&ndarray::Array1::from(x));
        labels.push(y);
    }
    Dataset::new(format!("synthetic-{seed}"), features, labels)
}

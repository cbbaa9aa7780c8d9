//! Full-covariance Gaussian mixtures fitted by EM, with BIC model selection.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::kmeanspp_seed;
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFitConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub max_em_iters: usize,
    /// EM stops once the total log-likelihood improves by less than `rel_tol * |ll|`.
    pub rel_tol: f64,
    /// Added to every covariance diagonal.
    pub cov_reg: f64,
    pub n_init: usize,
}

impl Default for GmmFitConfig {
    fn default() -> Self {
        Self { k_min: 1, k_max: 25, max_em_iters: 100, rel_tol: 1e-4, cov_reg: 1e-6, n_init: 3 }
    }
}

impl GmmFitConfig {
    /// Bounds the component search by the pool size: at most one component per
    /// ten samples, never fewer than one.
    pub fn capped_for(&self, m: usize) -> Self {
        let k_max = self.k_max.min(m / 10).max(1);
        Self { k_max, k_min: self.k_min.min(k_max), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_min == 0 || self.k_min > self.k_max {
            return Err(Error::invalid("need 1 <= k_min <= k_max"));
        }
        if !(self.rel_tol > 0.0) || !(self.cov_reg > 0.0) {
            return Err(Error::invalid("rel_tol and cov_reg must be positive"));
        }
        if self.n_init == 0 || self.max_em_iters == 0 {
            return Err(Error::invalid("n_init and max_em_iters must be positive"));
        }
        Ok(())
    }
}

/// From this width on, dense matrix products beat the per-row loops.
const BLOCKED_DIM: usize = 8;

/// Calls `$f::<D>` with the runtime width `$d` as a compile-time constant.
macro_rules! with_dim {
    ($d:expr, $f:ident, $($arg:expr),*) => {
        match $d {
            1 => $f::<1>($($arg),*),
            2 => $f::<2>($($arg),*),
            3 => $f::<3>($($arg),*),
            4 => $f::<4>($($arg),*),
            5 => $f::<5>($($arg),*),
            6 => $f::<6>($($arg),*),
            7 => $f::<7>($($arg),*),
            _ => unreachable!("widths from BLOCKED_DIM on use the blocked kernels"),
        }
    };
}

/// `bases[j] - |L_j⁻¹ (x_i - μ_j)|² / 2` into row-major `out` (m × K).
fn log_prob_rows<const D: usize>(xs: &[f64], means: &[f64], invs: &[f64], bases: &[f64], out: &mut [f64]) {
    let k = bases.len();
    for (xi, oi) in xs.chunks_exact(D).zip(out.chunks_exact_mut(k)) {
        for (j, o) in oi.iter_mut().enumerate() {
            let mu = &means[j * D..(j + 1) * D];
            let inv = &invs[j * D * D..(j + 1) * D * D];
            let mut diff = [0.0; D];
            for a in 0..D {
                diff[a] = xi[a] - mu[a];
            }
            let mut q = 0.0;
            for r in 0..D {
                let mut s = 0.0;
                for c in 0..=r {
                    s += inv[r * D + c] * diff[c];
                }
                q += s * s;
            }
            *o = bases[j] - 0.5 * q;
        }
    }
}

/// Adds `r_ij (x_i - μ_j)(x_i - μ_j)ᵀ` (lower triangle) into the j-th D×D block of `acc`.
fn scatter_rows<const D: usize>(xs: &[f64], resp: &[f64], means: &[f64], acc: &mut [f64]) {
    let k = means.len() / D;
    for (xi, ri) in xs.chunks_exact(D).zip(resp.chunks_exact(k)) {
        for (j, &r) in ri.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            let mu = &means[j * D..(j + 1) * D];
            let mut diff = [0.0; D];
            for a in 0..D {
                diff[a] = xi[a] - mu[a];
            }
            let block = &mut acc[j * D * D..(j + 1) * D * D];
            for a in 0..D {
                let w = r * diff[a];
                for c in 0..=a {
                    block[a * D + c] += w * diff[c];
                }
            }
        }
    }
}

/// Cholesky-derived quantities for one component.
#[derive(Debug, Clone, PartialEq)]
struct Factor {
    /// Inverse of the lower Cholesky factor.
    inv_chol: Array2<f64>,
    /// `ln |Σ| / 2`.
    half_log_det: f64,
}

fn factorize(cov: &Array2<f64>) -> Option<Factor> {
    let d = cov.nrows();
    let m = DMatrix::from_fn(d, d, |i, j| cov[[i, j]]);
    let chol = m.cholesky()?;
    let l = chol.l();
    let half_log_det = l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let inv = l.solve_lower_triangular(&DMatrix::identity(d, d))?;
    if !half_log_det.is_finite() || inv.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(Factor { inv_chol: Array2::from_shape_fn((d, d), |(i, j)| inv[(i, j)]), half_log_det })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GmmParams {
    weights: Vec<f64>,
    means: Array2<f64>,
    covariances: Vec<Array2<f64>>,
    final_log_likelihood: f64,
}

/// A fitted mixture. Deserialization re-validates the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmParams", into = "GmmParams")]
pub struct GmmModel {
    weights: Vec<f64>,
    means: Array2<f64>,
    covariances: Vec<Array2<f64>>,
    final_log_likelihood: f64,
    factors: Vec<Factor>,
    trace: Vec<f64>,
}

impl TryFrom<GmmParams> for GmmModel {
    type Error = Error;

    fn try_from(p: GmmParams) -> Result<Self> {
        let mut model = GmmModel::new(p.weights, p.means, p.covariances)?;
        model.final_log_likelihood = p.final_log_likelihood;
        Ok(model)
    }
}

impl From<GmmModel> for GmmParams {
    fn from(m: GmmModel) -> Self {
        GmmParams {
            weights: m.weights,
            means: m.means,
            covariances: m.covariances,
            final_log_likelihood: m.final_log_likelihood,
        }
    }
}

impl GmmModel {
    pub fn new(weights: Vec<f64>, means: Array2<f64>, covariances: Vec<Array2<f64>>) -> Result<Self> {
        let (k, d) = means.dim();
        if k == 0 || weights.len() != k || covariances.len() != k {
            return Err(Error::invalid("weights, means and covariances disagree on K"));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("mixture weights must form a simplex"));
        }
        let mut factors = Vec::with_capacity(k);
        for cov in &covariances {
            if cov.dim() != (d, d) {
                return Err(Error::DimensionMismatch { expected: d, got: cov.nrows() });
            }
            if cov.iter().zip(cov.t().iter()).any(|(a, b)| (a - b).abs() > 1e-9) {
                return Err(Error::invalid("covariance is not symmetric"));
            }
            factors.push(factorize(cov).ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?);
        }
        Ok(Self { weights, means, covariances, final_log_likelihood: f64::NAN, factors, trace: Vec::new() })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> ArrayView2<'_, f64> {
        self.means.view()
    }

    pub fn covariances(&self) -> &[Array2<f64>] {
        &self.covariances
    }

    /// Total log-likelihood of the data the model was fitted on (nats).
    pub fn final_log_likelihood(&self) -> f64 {
        self.final_log_likelihood
    }

    /// Log-likelihood after every accepted EM step of the winning restart.
    pub fn log_likelihood_trace(&self) -> &[f64] {
        &self.trace
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: d });
        }
        Ok(())
    }

    /// `ln w_k + ln N(x_i; μ_k, Σ_k)` for every row and component.
    fn weighted_log_prob(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let (m, d) = x.dim();
        if d >= BLOCKED_DIM {
            return self.weighted_log_prob_blocked(x);
        }
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let norm = 0.5 * d as f64 * (2.0 * PI).ln();
        let k = self.k();
        let means = self.means.as_standard_layout();
        let means = means.as_slice().expect("standard layout");
        let invs: Vec<f64> = self.factors.iter().flat_map(|f| f.inv_chol.iter().copied()).collect();
        let bases: Vec<f64> =
            self.factors.iter().zip(&self.weights).map(|(f, w)| w.ln() - norm - f.half_log_det).collect();
        let mut out = Array2::zeros((m, k));
        let os = out.as_slice_mut().expect("standard layout");
        with_dim!(d, log_prob_rows, xs, means, &invs, &bases, os);
        out
    }

    fn weighted_log_prob_blocked(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let (m, d) = x.dim();
        let norm = 0.5 * d as f64 * (2.0 * PI).ln();
        let mut out = Array2::zeros((m, self.k()));
        for (k, f) in self.factors.iter().enumerate() {
            let centered = &x - &self.means.row(k);
            let y = centered.dot(&f.inv_chol.t());
            let base = self.weights[k].ln() - norm - f.half_log_det;
            for (o, row) in out.column_mut(k).iter_mut().zip(y.rows()) {
                *o = base - 0.5 * row.dot(&row);
            }
        }
        out
    }

    pub fn log_density(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        self.check_dim(x.len())?;
        let row = x.insert_axis(Axis(0));
        Ok(log_sum_exp(self.weighted_log_prob(row).row(0)))
    }

    /// Row-wise [`log_density`](Self::log_density).
    pub fn score_samples(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(x.ncols())?;
        let lp = self.weighted_log_prob(x);
        Ok(lp.rows().into_iter().map(log_sum_exp).collect())
    }

    /// Posterior component probabilities for every row.
    pub fn responsibilities(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_dim(x.ncols())?;
        Ok(estep(self, x).1)
    }

    pub fn total_log_likelihood(&self, x: ArrayView2<'_, f64>) -> Result<f64> {
        Ok(self.score_samples(x)?.sum())
    }

    /// Free parameters: `(K-1)` weights, `K·d` means, `K·d(d+1)/2` covariance entries.
    pub fn n_parameters(&self) -> usize {
        let (k, d) = (self.k(), self.dim());
        (k - 1) + k * d + k * d * (d + 1) / 2
    }
}

fn log_sum_exp(row: ArrayView1<'_, f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Returns the total log-likelihood and the responsibilities.
fn estep(model: &GmmModel, x: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
    let mut lp = model.weighted_log_prob(x);
    let mut total = 0.0;
    for mut row in lp.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        total += max + sum.ln();
        row /= sum;
    }
    (total, lp)
}

fn mstep(x: ArrayView2<'_, f64>, resp: &Array2<f64>, reg: f64) -> Result<GmmModel> {
    let (m, d) = x.dim();
    let nk: Array1<f64> = resp.sum_axis(Axis(0)) + 10.0 * f64::EPSILON;
    let weights: Vec<f64> = {
        let total = nk.sum();
        nk.iter().map(|v| v / total).collect()
    };
    let means = resp.t().dot(&x) / nk.view().insert_axis(Axis(1));
    let covariances = if d >= BLOCKED_DIM {
        covariances_blocked(x, resp, &means, &nk, reg)
    } else {
        covariances_looped(x, resp, &means, &nk, reg)
    };
    debug_assert_eq!(resp.nrows(), m);
    build_with_repair(weights, means, covariances, reg)
}

fn covariances_blocked(
    x: ArrayView2<'_, f64>,
    resp: &Array2<f64>,
    means: &Array2<f64>,
    nk: &Array1<f64>,
    reg: f64,
) -> Vec<Array2<f64>> {
    (0..resp.ncols())
        .map(|j| {
            let centered = &x - &means.row(j);
            let weighted = &centered * &resp.column(j).insert_axis(Axis(1));
            let mut cov = weighted.t().dot(&centered) / nk[j];
            cov = (&cov + &cov.t()) * 0.5;
            for i in 0..cov.nrows() {
                cov[[i, i]] += reg;
            }
            cov
        })
        .collect()
}

fn covariances_looped(
    x: ArrayView2<'_, f64>,
    resp: &Array2<f64>,
    means: &Array2<f64>,
    nk: &Array1<f64>,
    reg: f64,
) -> Vec<Array2<f64>> {
    let d = x.ncols();
    let k = resp.ncols();
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let resp = resp.as_standard_layout();
    let rs = resp.as_slice().expect("standard layout");
    let means = means.as_standard_layout();
    let ms = means.as_slice().expect("standard layout");
    // Lower triangles of the unnormalized scatter matrices, one d×d block per component.
    let mut acc = vec![0.0; k * d * d];
    with_dim!(d, scatter_rows, xs, rs, ms, &mut acc);
    (0..k)
        .map(|j| {
            let block = &acc[j * d * d..(j + 1) * d * d];
            let mut cov = Array2::<f64>::zeros((d, d));
            for a in 0..d {
                for b in 0..=a {
                    let v = block[a * d + b] / nk[j];
                    cov[[a, b]] = v;
                    cov[[b, a]] = v;
                }
                cov[[a, a]] += reg;
            }
            cov
        })
        .collect()
}

/// Builds a model, inflating the diagonal of any covariance whose Cholesky
/// factorization fails, up to a bounded number of attempts.
fn build_with_repair(
    weights: Vec<f64>,
    means: Array2<f64>,
    mut covariances: Vec<Array2<f64>>,
    reg: f64,
) -> Result<GmmModel> {
    for cov in covariances.iter_mut() {
        let mut extra = reg;
        let mut attempts = 0;
        while factorize(cov).is_none() {
            attempts += 1;
            if attempts > 8 || cov.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("covariance stays singular after regularization".into()));
            }
            extra *= 10.0;
            for i in 0..cov.nrows() {
                cov[[i, i]] += extra;
            }
        }
    }
    GmmModel::new(weights, means, covariances)
}

fn data_covariance(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let m = x.nrows() as f64;
    let mean = x.mean_axis(Axis(0)).unwrap();
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / m;
    (&cov + &cov.t()) * 0.5
}

/// EM from one k-means++ initialization. Steps that fail to raise the
/// likelihood are discarded and end the run.
fn em_single(x: ArrayView2<'_, f64>, k: usize, cfg: &GmmFitConfig, seed: u64) -> Result<GmmModel> {
    let d = x.ncols();
    let means = kmeanspp_seed(x, k, seed)?;
    let mut cov = data_covariance(x);
    for i in 0..d {
        cov[[i, i]] += cfg.cov_reg;
    }
    let mut model = build_with_repair(vec![1.0 / k as f64; k], means, vec![cov; k], cfg.cov_reg)?;
    let (mut ll, mut resp) = estep(&model, x);
    let mut trace = vec![ll];

    for _ in 0..cfg.max_em_iters {
        let candidate = mstep(x, &resp, cfg.cov_reg)?;
        let (next_ll, next_resp) = estep(&candidate, x);
        if !(next_ll >= ll) {
            break;
        }
        let improvement = next_ll - ll;
        model = candidate;
        resp = next_resp;
        ll = next_ll;
        trace.push(ll);
        if improvement <= cfg.rel_tol * ll.abs() {
            break;
        }
    }
    model.final_log_likelihood = ll;
    model.trace = trace;
    Ok(model)
}

/// Maximum-likelihood mixture with `k` components; the best of `cfg.n_init` restarts.
pub fn fit_em(x: ArrayView2<'_, f64>, k: usize, cfg: &GmmFitConfig, seed: u64) -> Result<GmmModel> {
    let (m, d) = x.dim();
    if d == 0 {
        return Err(Error::invalid("mixture fitting needs at least one feature"));
    }
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if m < k {
        return Err(Error::TooFewSamples { needed: k, got: m });
    }
    cfg.validate()?;
    let fits: Vec<Result<GmmModel>> =
        (0..cfg.n_init).into_par_iter().map(|r| em_single(x, k, cfg, derive_seed(seed, r as u64))).collect();
    let mut best: Option<GmmModel> = None;
    for fit in fits {
        let fit = fit?;
        // Strict comparison: earlier restarts win ties.
        if best.as_ref().is_none_or(|b| fit.final_log_likelihood > b.final_log_likelihood) {
            best = Some(fit);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

/// Bayesian information criterion `-2 ln L + p ln m` of `model` on `x`.
pub fn bic(model: &GmmModel, x: ArrayView2<'_, f64>) -> Result<f64> {
    let ll = model.total_log_likelihood(x)?;
    Ok(-2.0 * ll + model.n_parameters() as f64 * (x.nrows() as f64).ln())
}

/// Fits every K in `[k_min, min(k_max, m)]` and keeps the lowest BIC (smaller K on ties).
pub fn select_k(x: ArrayView2<'_, f64>, cfg: &GmmFitConfig, seed: u64) -> Result<GmmModel> {
    cfg.validate()?;
    let m = x.nrows();
    if m < cfg.k_min {
        return Err(Error::TooFewSamples { needed: cfg.k_min, got: m });
    }
    let upper = cfg.k_max.min(m);
    let fits: Vec<Result<(f64, GmmModel)>> = (cfg.k_min..=upper)
        .into_par_iter()
        .map(|k| {
            let model = fit_em(x, k, cfg, derive_seed(seed, k as u64))?;
            Ok((bic(&model, x)?, model))
        })
        .collect();
    let mut best: Option<(f64, GmmModel)> = None;
    for fit in fits {
        let (score, model) = fit?;
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, model));
        }
    }
    Ok(best.expect("non-empty K range").1)
}

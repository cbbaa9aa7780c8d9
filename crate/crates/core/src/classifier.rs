//! RBF-kernel support vector machine trained with SMO, calibrated to
//! probabilities with Platt's sigmoid. Label `1` (anomaly) is the positive class.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::cluster::sq_dist;
use crate::dataset::ANOMALY;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub gamma: f64,
    pub c: f64,
}

impl KernelParams {
    pub fn new(gamma: f64, c: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) || !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("kernel parameters must be positive (gamma={gamma}, C={c})")));
        }
        Ok(Self { gamma, c })
    }

    /// `C = 1`, `gamma = 1 / (d · Var(X))` over all entries of `x`; falls back to
    /// `1/d` when the features have no spread.
    pub fn scale_heuristic(x: ArrayView2<'_, f64>) -> Self {
        let d = x.ncols().max(1) as f64;
        let var = if x.is_empty() {
            0.0
        } else {
            let mean = x.mean().unwrap_or(0.0);
            x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64
        };
        let gamma = if var > 1e-12 { 1.0 / (d * var) } else { 1.0 / d };
        Self { gamma, c: 1.0 }
    }

    #[inline]
    pub fn kernel(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        (-self.gamma * sq_dist(a, b)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Stop when the maximal KKT violation falls below this.
    pub kkt_tol: f64,
    pub max_iter: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { kkt_tol: 1e-3, max_iter: 10_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Array2<f64>,
    /// `alpha_i * y_i` with `y_i ∈ {-1, +1}`.
    pub dual_weights: Vec<f64>,
    pub bias: f64,
    pub params: KernelParams,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.ncols()
    }

    /// `Σ w_i exp(-gamma ‖x - sv_i‖²) + bias`.
    pub fn decision_value(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self
            .support_vectors
            .rows()
            .into_iter()
            .zip(&self.dual_weights)
            .map(|(sv, w)| w * self.params.kernel(sv, x))
            .sum::<f64>()
            + self.bias)
    }

    /// Dual objective `Σ α_i - ½ Σ_ij α_i α_j y_i y_j K_ij` (to be maximized).
    pub fn dual_objective(&self) -> f64 {
        let sv = &self.support_vectors;
        let w = &self.dual_weights;
        let mut quad = 0.0;
        for i in 0..w.len() {
            for j in 0..w.len() {
                quad += w[i] * w[j] * self.params.kernel(sv.row(i), sv.row(j));
            }
        }
        w.iter().map(|v| v.abs()).sum::<f64>() - 0.5 * quad
    }
}

const TAU: f64 = 1e-12;

/// Soft-margin dual solved by SMO with second-order working-set selection.
/// `y` holds ±1.
pub fn smo(x: ArrayView2<'_, f64>, y: &[f64], params: KernelParams, opts: TrainOptions) -> SvmModel {
    let m = x.nrows();
    let c = params.c;
    let mut k = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in 0..=i {
            let v = params.kernel(x.row(i), x.row(j));
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    let mut alpha = vec![0.0; m];
    let mut grad = vec![-1.0; m];

    for _ in 0..opts.max_iter {
        // i: maximal violating index from the "up" set.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..m {
            let v = -y[t] * grad[t];
            let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if up && v >= gmax {
                gmax = v;
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        // j: second-order choice from the "low" set.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut obj_min = f64::INFINITY;
        let mut j = usize::MAX;
        for t in 0..m {
            let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if !low {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let mut quad = k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < opts.kkt_tol || j == usize::MAX {
            break;
        }

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]];
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..m {
            grad[t] += y[t] * (y[i] * k[[t, i]] * di + y[j] * k[[t, j]] * dj);
        }
    }

    // Offset: average over free vectors, else midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..m {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };

    let sv: Vec<usize> = (0..m).filter(|&t| alpha[t] > 0.0).collect();
    SvmModel {
        support_vectors: x.select(Axis(0), &sv),
        dual_weights: sv.iter().map(|&t| alpha[t] * y[t]).collect(),
        bias: -rho,
        params,
    }
}

/// Platt sigmoid `P(y = 1 | v) = 1 / (1 + exp(A v + B))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

impl PlattParams {
    pub fn probability(&self, v: f64) -> f64 {
        let f = self.a * v + self.b;
        // Branches keep exp() from overflowing.
        if f >= 0.0 {
            let e = (-f).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + f.exp())
        }
    }
}

/// Newton fit with backtracking on the regularized targets
/// `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)`.
pub fn fit_platt(decision: &[f64], positive: &[bool]) -> PlattParams {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let target: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        decision
            .iter()
            .zip(&target)
            .map(|(&v, &t)| {
                let f = v * a + b;
                if f >= 0.0 {
                    t * f + (1.0 + (-f).exp()).ln()
                } else {
                    (t - 1.0) * f + (1.0 + f.exp()).ln()
                }
            })
            .sum()
    };

    let (max_iter, min_step, sigma, eps) = (100, 1e-10, 1e-12, 1e-5);
    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..max_iter {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (&v, &t) in decision.iter().zip(&target) {
            let f = v * a + b;
            let (p, q) = if f >= 0.0 {
                let e = (-f).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = f.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += v * v * d2;
            h22 += d2;
            h21 += v * d2;
            let d1 = t - p;
            g1 += v * d1;
            g2 += d1;
        }
        if g1.abs() < eps && g2.abs() < eps {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < min_step {
            log::debug!("Platt line search failed");
            break;
        }
    }
    PlattParams { a, b }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Calibration {
    Svm {
        svm: SvmModel,
        platt: PlattParams,
    },
    /// Constant prediction used when the labeled set cannot support an SVM.
    Prior {
        p_anomaly: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedClassifier {
    pub calibration: Calibration,
    pub classes_seen: Vec<u8>,
    pub dim: usize,
    /// Why a fallback was taken, if one was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl CalibratedClassifier {
    /// `[P(normal | x), P(anomaly | x)]`.
    pub fn predict_proba(&self, x: ArrayView1<'_, f64>) -> Result<[f64; 2]> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let p1 = match &self.calibration {
            Calibration::Svm { svm, platt } => platt.probability(svm.decision_value(x)?),
            Calibration::Prior { p_anomaly } => *p_anomaly,
        };
        Ok([1.0 - p1, p1])
    }

    /// Anomaly probabilities for every row.
    pub fn anomaly_scores(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        x.rows().into_iter().map(|r| Ok(self.predict_proba(r)?[1])).collect()
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self.calibration, Calibration::Prior { .. })
    }
}

/// Trains on `(x, y)` with `y ∈ {0, 1}`. Rows are put in a canonical order first,
/// so the result does not depend on how the labeled set was enumerated.
pub fn train(x: ArrayView2<'_, f64>, y: &[u8], params: KernelParams) -> Result<CalibratedClassifier> {
    train_with(x, y, params, TrainOptions::default())
}

pub fn train_with(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    params: KernelParams,
    opts: TrainOptions,
) -> Result<CalibratedClassifier> {
    let (m, d) = x.dim();
    if m == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len() });
    }
    if let Some(&bad) = y.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidLabel(bad as i64));
    }
    let params = KernelParams::new(params.gamma, params.c)?;
    let n_pos = y.iter().filter(|&&l| l == ANOMALY).count();
    let mut classes_seen: Vec<u8> = Vec::new();
    if n_pos < m {
        classes_seen.push(0);
    }
    if n_pos > 0 {
        classes_seen.push(1);
    }
    let prior = (n_pos as f64 + 1.0) / (m as f64 + 2.0);
    if classes_seen.len() < 2 {
        return Ok(CalibratedClassifier {
            calibration: Calibration::Prior { p_anomaly: prior },
            classes_seen,
            dim: d,
            diagnostic: Some("single class in training set".into()),
        });
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b).iter())
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y[a].cmp(&y[b]))
    });
    let xs = x.select(Axis(0), &order);
    let ys: Vec<f64> = order.iter().map(|&i| if y[i] == ANOMALY { 1.0 } else { -1.0 }).collect();

    let svm = smo(xs.view(), &ys, params, opts);
    let decision: Vec<f64> = xs.rows().into_iter().map(|r| svm.decision_value(r)).collect::<Result<_>>()?;
    let positive: Vec<bool> = ys.iter().map(|&v| v > 0.0).collect();
    let platt = fit_platt(&decision, &positive);
    if !(platt.a < 0.0) {
        log::debug!("Platt slope {} is not negative; using class prior", platt.a);
        return Ok(CalibratedClassifier {
            calibration: Calibration::Prior { p_anomaly: prior },
            classes_seen,
            dim: d,
            diagnostic: Some(format!("Platt slope A={} is not negative", platt.a)),
        });
    }
    Ok(CalibratedClassifier { calibration: Calibration::Svm { svm, platt }, classes_seen, dim: d, diagnostic: None })
}

//! K-means++ seeding, Lloyd k-means and k-medoids (Voronoi iteration followed
//! by swap refinement). All distances are squared Euclidean.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;

use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub centers: Array2<f64>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every Lloyd iteration.
    pub inertia_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedoidResult {
    /// Row indices of the medoids; medoid `j` is the center of cluster `j`.
    pub medoids: Vec<usize>,
    pub assignments: Vec<usize>,
    pub cost: f64,
    pub cost_history: Vec<f64>,
}

#[inline]
pub fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_k(m: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if m < k {
        return Err(Error::TooFewSamples { needed: k, got: m });
    }
    Ok(())
}

/// D²-weighted seeding; returns the chosen row indices in draw order.
pub fn kmeanspp_indices(x: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let m = x.nrows();
    check_k(m, k)?;
    let mut rng = rng::seeded(seed);
    let mut chosen = vec![rng.random_range(0..m)];
    let mut d2: Vec<f64> = x.rows().into_iter().map(|r| sq_dist(r, x.row(chosen[0]))).collect();
    let mut taken = vec![false; m];
    taken[chosen[0]] = true;

    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just past the final sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // Every remaining point coincides with a chosen one: pick uniformly.
            let free: Vec<usize> = (0..m).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        taken[next] = true;
        chosen.push(next);
        let c = x.row(next);
        for (i, r) in x.rows().into_iter().enumerate() {
            let d = sq_dist(r, c);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    Ok(chosen)
}

pub fn kmeanspp_seed(x: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<Array2<f64>> {
    let idx = kmeanspp_indices(x, k, seed)?;
    Ok(x.select(Axis(0), &idx))
}

fn nearest(row: ArrayView1<'_, f64>, centers: ArrayView2<'_, f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.rows().into_iter().enumerate() {
        let d = sq_dist(row, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd iterations from k-means++ seeds until assignments stop changing.
pub fn kmeans(x: ArrayView2<'_, f64>, k: usize, seed: u64, max_iters: usize) -> Result<ClusteringResult> {
    let (m, d) = x.dim();
    check_k(m, k)?;
    let mut centers = kmeanspp_seed(x, k, seed)?;
    let mut assignments = vec![usize::MAX; m];
    let mut history = Vec::new();

    for _ in 0..max_iters.max(1) {
        let mut next: Vec<usize> = Vec::with_capacity(m);
        let mut dist: Vec<f64> = Vec::with_capacity(m);
        for r in x.rows() {
            let (j, dd) = nearest(r, centers.view());
            next.push(j);
            dist.push(dd);
        }
        repair_empty(&mut next, &mut dist, k);
        let changed = next != assignments;
        assignments = next;

        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, &j) in assignments.iter().enumerate() {
            let mut s = sums.row_mut(j);
            s += &x.row(i);
            counts[j] += 1;
        }
        for (j, mut c) in centers.rows_mut().into_iter().enumerate() {
            c.assign(&(&sums.row(j) / counts[j] as f64));
        }
        history.push(inertia(x, centers.view(), &assignments));
        if !changed {
            break;
        }
    }
    Ok(ClusteringResult { centers, inertia: *history.last().unwrap(), assignments, inertia_history: history })
}

/// Gives every empty cluster the point that currently sits farthest from its
/// center, taken only from clusters that can spare a member.
fn repair_empty(assign: &mut [usize], dist: &mut [f64], k: usize) {
    let mut counts = vec![0usize; k];
    for &j in assign.iter() {
        counts[j] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let donor = (0..assign.len())
            .filter(|&i| counts[assign[i]] > 1)
            .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
            .expect("m >= k guarantees a donor");
        counts[assign[donor]] -= 1;
        assign[donor] = empty;
        dist[donor] = 0.0;
        counts[empty] = 1;
    }
}

fn inertia(x: ArrayView2<'_, f64>, centers: ArrayView2<'_, f64>, assign: &[usize]) -> f64 {
    x.rows().into_iter().zip(assign).map(|(r, &j)| sq_dist(r, centers.row(j))).sum()
}

/// K-medoids. Alternating phase: assign to the nearest medoid, then move each
/// medoid to the member with the smallest total distance to its cluster. The
/// alternating fixed point is then polished with medoid/non-medoid swaps until
/// no swap lowers the cost.
pub fn kmedoids(x: ArrayView2<'_, f64>, k: usize, seed: u64, max_iters: usize) -> Result<MedoidResult> {
    let m = x.nrows();
    check_k(m, k)?;
    let mut medoids = kmeanspp_indices(x, k, seed)?;
    let mut history = Vec::new();
    let mut assignments;

    let mut iter = 0;
    loop {
        assignments = assign_to_medoids(x, &medoids);
        let cost: f64 = (0..m).map(|i| sq_dist(x.row(i), x.row(medoids[assignments[i]]))).sum();
        history.push(cost);
        iter += 1;
        if iter > max_iters.max(1) {
            break;
        }

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &j) in assignments.iter().enumerate() {
            members[j].push(i);
        }
        let mut moved = false;
        for (j, group) in members.iter().enumerate() {
            let within = |c: usize| group.iter().map(|&i| sq_dist(x.row(i), x.row(c))).sum::<f64>();
            let mut best = (medoids[j], within(medoids[j]));
            for &cand in group {
                let cost = within(cand);
                if cost < best.1 {
                    best = (cand, cost);
                }
            }
            if best.0 != medoids[j] {
                medoids[j] = best.0;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    swap_refine(x, &mut medoids, &mut history);
    let assignments = assign_to_medoids(x, &medoids);
    Ok(MedoidResult { cost: *history.last().unwrap(), medoids, assignments, cost_history: history })
}

/// Nearest and second-nearest medoid distance for every row.
fn medoid_distances(x: ArrayView2<'_, f64>, medoids: &[usize]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let m = x.nrows();
    let (mut near, mut d1, mut d2) = (vec![0; m], vec![f64::INFINITY; m], vec![f64::INFINITY; m]);
    for i in 0..m {
        for (j, &med) in medoids.iter().enumerate() {
            let d = sq_dist(x.row(i), x.row(med));
            if d < d1[i] {
                d2[i] = d1[i];
                d1[i] = d;
                near[i] = j;
            } else if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    (near, d1, d2)
}

/// Best-improvement swap phase. For a candidate `h`, the cost change of
/// replacing medoid `j` is a shared term over all rows plus a correction over
/// the rows currently served by `j`, so all `k` swaps are scored in one pass.
fn swap_refine(x: ArrayView2<'_, f64>, medoids: &mut [usize], history: &mut Vec<f64>) {
    let (m, k) = (x.nrows(), medoids.len());
    if k == m {
        return;
    }
    let mut is_medoid = vec![false; m];
    for &med in medoids.iter() {
        is_medoid[med] = true;
    }
    let mut cost = *history.last().unwrap();
    loop {
        let (near, d1, d2) = medoid_distances(x, medoids);
        let mut best = (0.0, usize::MAX, usize::MAX);
        let mut delta = vec![0.0; k];
        for h in 0..m {
            if is_medoid[h] {
                continue;
            }
            delta.iter_mut().for_each(|v| *v = 0.0);
            let mut shared = 0.0;
            for o in 0..m {
                let dh = sq_dist(x.row(o), x.row(h));
                let gain = (dh - d1[o]).min(0.0);
                shared += gain;
                delta[near[o]] += dh.min(d2[o]) - d1[o] - gain;
            }
            for (j, &dj) in delta.iter().enumerate() {
                let total = shared + dj;
                if total < best.0 {
                    best = (total, j, h);
                }
            }
        }
        let (gain, j, h) = best;
        if j == usize::MAX || gain > -1e-12 * cost.max(1.0) {
            break;
        }
        is_medoid[medoids[j]] = false;
        is_medoid[h] = true;
        medoids[j] = h;
        let (_, d1, _) = medoid_distances(x, medoids);
        cost = d1.iter().sum();
        history.push(cost);
    }
}

fn assign_to_medoids(x: ArrayView2<'_, f64>, medoids: &[usize]) -> Vec<usize> {
    let centers = x.select(Axis(0), medoids);
    let mut assign: Vec<usize> = x.rows().into_iter().map(|r| nearest(r, centers.view()).0).collect();
    // A medoid always belongs to its own cluster, even when it coincides with another.
    for (j, &med) in medoids.iter().enumerate() {
        assign[med] = j;
    }
    assign
}

/// For each center in order, the closest row not already claimed by an earlier center.
pub fn nearest_to_centers(x: ArrayView2<'_, f64>, centers: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    let m = x.nrows();
    check_k(m, centers.nrows())?;
    if x.ncols() != centers.ncols() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), got: centers.ncols() });
    }
    let mut claimed = vec![false; m];
    let mut out = Vec::with_capacity(centers.nrows());
    for c in centers.rows() {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, r) in x.rows().into_iter().enumerate() {
            if claimed[i] {
                continue;
            }
            let d = sq_dist(r, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        claimed[best.0] = true;
        out.push(best.0);
    }
    Ok(out)
}

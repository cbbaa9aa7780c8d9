//! Query strategies: the balancing schedule, the representative and
//! informative samplers it mixes, and the three baselines.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::classifier::CalibratedClassifier;
use crate::cluster::{kmeans, kmedoids, nearest_to_centers};
use crate::mixture::{select_k, GmmFitConfig};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

const CLUSTER_MAX_ITERS: usize = 300;

/// Batch size, annotator confidence and the two schedule breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancingParams {
    pub b: usize,
    pub c: f64,
    pub t1: usize,
    pub t2: usize,
}

impl Default for BalancingParams {
    fn default() -> Self {
        Self { b: 20, c: 0.0, t1: 0, t2: 5 }
    }
}

impl BalancingParams {
    pub fn new(b: usize, c: f64, t1: usize, t2: usize) -> Result<Self> {
        let p = Self { b, c, t1, t2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.c) {
            return Err(Error::invalid(format!("confidence c = {} outside [0, 1]", self.c)));
        }
        if self.t1 >= self.t2 {
            return Err(Error::invalid(format!("need t1 < t2, got t1 = {}, t2 = {}", self.t1, self.t2)));
        }
        Ok(())
    }

    /// `ceil(b * c)`, with a small slack so products like `20 * 0.3` that land a
    /// rounding error above an integer do not jump to the next one.
    pub fn confidence_offset(&self) -> usize {
        (self.b as f64 * self.c - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchAllocation {
    pub n_repr: usize,
    pub n_info: usize,
}

impl BatchAllocation {
    pub fn total(&self) -> usize {
        self.n_repr + self.n_info
    }

    /// Shrinks the allocation to `size` keeping the ratio: both shares are
    /// floored and the remainder goes to the larger share (representative on a tie).
    pub fn scaled_to(&self, size: usize) -> Self {
        let total = self.total();
        if size >= total {
            return *self;
        }
        let mut n_repr = self.n_repr * size / total;
        let mut n_info = self.n_info * size / total;
        let rest = size - n_repr - n_info;
        if self.n_repr >= self.n_info {
            n_repr += rest;
        } else {
            n_info += rest;
        }
        Self { n_repr, n_info }
    }
}

/// The linear balancing schedule. Iterations count from 1.
pub fn balance(t: usize, p: &BalancingParams) -> Result<BatchAllocation> {
    p.validate()?;
    if t == 0 {
        return Err(Error::invalid("iterations are counted from 1"));
    }
    let b = p.b;
    Ok(if t < p.t1 {
        BatchAllocation { n_repr: b, n_info: 0 }
    } else if t < p.t2 {
        let shifted = t - p.t1;
        let info = (shifted + p.confidence_offset()) % b;
        BatchAllocation { n_repr: b - info, n_info: info }
    } else {
        BatchAllocation { n_repr: 0, n_info: b }
    })
}

/// Shannon entropy in nats; `0 ln 0` counts as zero.
pub fn entropy(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::invalid("entropy of an empty distribution"));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("probabilities must be finite and non-negative"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
    }
    Ok(-probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Representative,
    Informative,
    Random,
    MaxEntropy,
    Kmedoids,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryItem {
    pub index: usize,
    pub provenance: Provenance,
    /// Log-density for representative picks, entropy for informative and
    /// max-entropy picks, cluster size for k-medoids, absent for random.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryBatch {
    pub items: Vec<QueryItem>,
}

impl QueryBatch {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.items.iter().map(|q| q.index).collect()
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.items.iter().filter(|q| q.provenance == provenance).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Adaptive,
    Random,
    MaxEntropy,
    Kmedoids,
    Informative,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Adaptive,
        StrategyKind::Random,
        StrategyKind::MaxEntropy,
        StrategyKind::Kmedoids,
        StrategyKind::Informative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Adaptive => "adaptive",
            StrategyKind::Random => "random",
            StrategyKind::MaxEntropy => "max_entropy",
            StrategyKind::Kmedoids => "kmedoids",
            StrategyKind::Informative => "informative",
        }
    }

    /// Whether the strategy reads the current classifier.
    pub fn uses_classifier(self) -> bool {
        !matches!(self, StrategyKind::Random | StrategyKind::Kmedoids)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown strategy '{s}'")))
    }
}

fn check_pool(pool: &[usize], x: ArrayView2<'_, f64>) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::PoolExhausted);
    }
    if let Some(&bad) = pool.iter().find(|&&i| i >= x.nrows()) {
        return Err(Error::invalid(format!("pool index {bad} out of range for {} rows", x.nrows())));
    }
    Ok(())
}

fn pool_rows(pool: &[usize], x: ArrayView2<'_, f64>) -> Array2<f64> {
    x.select(Axis(0), pool)
}

fn entropies(pool: &[usize], x: ArrayView2<'_, f64>, clf: &CalibratedClassifier) -> Result<Vec<f64>> {
    pool.iter().map(|&i| entropy(&clf.predict_proba(x.row(i))?)).collect()
}

/// Positions into `pool` ordered by descending entropy, ties by lower dataset index.
fn rank_by_entropy(pool: &[usize], ent: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| ent[b].total_cmp(&ent[a]).then(pool[a].cmp(&pool[b])));
    order
}

/// Uniform draw of `min(b, |pool|)` indices without replacement.
pub fn sample_random(pool: &[usize], b: usize, seed: u64) -> Result<QueryBatch> {
    if pool.is_empty() {
        return Err(Error::PoolExhausted);
    }
    let mut rng = seeded(seed);
    let items = pool
        .choose_multiple(&mut rng, b.min(pool.len()))
        .map(|&index| QueryItem { index, provenance: Provenance::Random, score: None })
        .collect();
    Ok(QueryBatch { items })
}

/// The `b` highest-entropy pool members, no clustering.
pub fn sample_max_entropy(
    pool: &[usize],
    x: ArrayView2<'_, f64>,
    clf: &CalibratedClassifier,
    b: usize,
) -> Result<QueryBatch> {
    check_pool(pool, x)?;
    let ent = entropies(pool, x, clf)?;
    let items = rank_by_entropy(pool, &ent)
        .into_iter()
        .take(b)
        .map(|p| QueryItem { index: pool[p], provenance: Provenance::MaxEntropy, score: Some(ent[p]) })
        .collect();
    Ok(QueryBatch { items })
}

/// The medoids of a `min(b, |pool|)`-medoid clustering of the pool.
pub fn sample_kmedoids(pool: &[usize], x: ArrayView2<'_, f64>, b: usize, seed: u64) -> Result<QueryBatch> {
    check_pool(pool, x)?;
    let k = b.min(pool.len());
    let fit = kmedoids(pool_rows(pool, x).view(), k, seed, CLUSTER_MAX_ITERS)?;
    let mut sizes = vec![0usize; k];
    for &a in &fit.assignments {
        sizes[a] += 1;
    }
    let items = fit
        .medoids
        .iter()
        .zip(&sizes)
        .map(|(&m, &size)| QueryItem { index: pool[m], provenance: Provenance::Kmedoids, score: Some(size as f64) })
        .collect();
    Ok(QueryBatch { items })
}

/// Density-driven picks from a BIC-selected mixture of the pool.
///
/// With at least `n_repr` components, the instances nearest to the means of
/// lowest mixture density are returned. Otherwise every mean is mapped to its
/// nearest instance and the shortfall is filled by the least likely instances.
pub fn sample_representative(
    pool: &[usize],
    x: ArrayView2<'_, f64>,
    n_repr: usize,
    cfg: &GmmFitConfig,
    seed: u64,
) -> Result<QueryBatch> {
    check_pool(pool, x)?;
    if n_repr == 0 || n_repr > pool.len() {
        return Err(Error::invalid(format!("representative share {n_repr} must be in 1..={}", pool.len())));
    }
    let rows = pool_rows(pool, x);
    let gmm = select_k(rows.view(), &cfg.capped_for(pool.len()), seed)?;
    let mean_density = gmm.score_samples(gmm.means())?;
    let mut components: Vec<usize> = (0..gmm.k()).collect();
    components.sort_by(|&a, &b| mean_density[a].total_cmp(&mean_density[b]).then(a.cmp(&b)));
    components.truncate(n_repr);

    let centers = gmm.means().select(Axis(0), &components);
    let mut chosen = nearest_to_centers(rows.view(), centers.view())?;
    let density = gmm.score_samples(rows.view())?;
    if chosen.len() < n_repr {
        let mut claimed = vec![false; pool.len()];
        for &c in &chosen {
            claimed[c] = true;
        }
        let mut rest: Vec<usize> = (0..pool.len()).filter(|&p| !claimed[p]).collect();
        rest.sort_by(|&a, &b| density[a].total_cmp(&density[b]).then(pool[a].cmp(&pool[b])));
        chosen.extend(rest.into_iter().take(n_repr - chosen.len()));
    }
    let items = chosen
        .into_iter()
        .map(|p| QueryItem { index: pool[p], provenance: Provenance::Representative, score: Some(density[p]) })
        .collect();
    Ok(QueryBatch { items })
}

/// Entropy-driven picks diversified by k-means: the top `n_info / b` fraction
/// of the pool by entropy (at least `n_info` points) is clustered into `n_info`
/// groups and the instance nearest each centroid is returned.
pub fn sample_informative(
    pool: &[usize],
    x: ArrayView2<'_, f64>,
    clf: &CalibratedClassifier,
    n_info: usize,
    b: usize,
    seed: u64,
) -> Result<QueryBatch> {
    check_pool(pool, x)?;
    if n_info == 0 || n_info > pool.len() {
        return Err(Error::invalid(format!("informative share {n_info} must be in 1..={}", pool.len())));
    }
    if b < n_info {
        return Err(Error::invalid("informative share exceeds the batch size"));
    }
    let n_candidates = n_info.max((pool.len() * n_info).div_ceil(b)).min(pool.len());
    let ent = entropies(pool, x, clf)?;
    let candidates: Vec<usize> = rank_by_entropy(pool, &ent).into_iter().take(n_candidates).collect();
    let candidate_idx: Vec<usize> = candidates.iter().map(|&p| pool[p]).collect();
    let rows = pool_rows(&candidate_idx, x);
    let fit = kmeans(rows.view(), n_info, seed, CLUSTER_MAX_ITERS)?;
    let picks = nearest_to_centers(rows.view(), fit.centers.view())?;
    let items = picks
        .into_iter()
        .map(|c| {
            let p = candidates[c];
            QueryItem { index: pool[p], provenance: Provenance::Informative, score: Some(ent[p]) }
        })
        .collect();
    Ok(QueryBatch { items })
}

/// The adaptive batch: representative share first, removed from the pool, then
/// the informative share from what remains.
pub fn sample_adaptive(
    pool: &[usize],
    x: ArrayView2<'_, f64>,
    clf: &CalibratedClassifier,
    t: usize,
    params: &BalancingParams,
    cfg: &GmmFitConfig,
    seed: u64,
) -> Result<QueryBatch> {
    check_pool(pool, x)?;
    let alloc = balance(t, params)?.scaled_to(pool.len());
    let mut batch = QueryBatch::default();
    if alloc.n_repr > 0 {
        batch = sample_representative(pool, x, alloc.n_repr, cfg, derive_seed(seed, 0))?;
    }
    if alloc.n_info > 0 {
        let taken = batch.indices();
        let rest: Vec<usize> = pool.iter().copied().filter(|i| !taken.contains(i)).collect();
        let info = sample_informative(&rest, x, clf, alloc.n_info, alloc.total(), derive_seed(seed, 1))?;
        batch.items.extend(info.items);
    }
    Ok(batch)
}

/// Orders `(index, score)` pairs by ascending score, lower index first on ties.
pub fn ascending_by_score(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{train, KernelParams};
    use crate::dataset::{make_synthetic, SyntheticSpec};
    use ndarray::array;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn params(b: usize, c: f64, t1: usize, t2: usize) -> BalancingParams {
        BalancingParams::new(b, c, t1, t2).unwrap()
    }

    fn alloc(t: usize, p: BalancingParams) -> (usize, usize) {
        let a = balance(t, &p).unwrap();
        (a.n_repr, a.n_info)
    }

    #[test]
    fn balance_examples() {
        assert_eq!(alloc(1, params(20, 0.0, 2, 10)), (20, 0));
        assert_eq!(alloc(3, params(20, 0.0, 0, 5)), (17, 3));
        assert_eq!(alloc(6, params(20, 0.0, 0, 5)), (0, 20));
        assert_eq!(alloc(1, params(20, 0.5, 0, 5)), (9, 11));
        assert_eq!(alloc(1, params(20, 0.0, 0, 5)), (19, 1));
        assert_eq!(alloc(3, params(20, 0.5, 0, 5)), (7, 13));
    }

    #[test]
    fn balance_rejects_bad_input() {
        assert!(BalancingParams::new(20, 1.5, 0, 5).is_err());
        assert!(BalancingParams::new(20, 0.0, 5, 5).is_err());
        assert!(BalancingParams::new(0, 0.0, 0, 5).is_err());
        assert!(balance(0, &BalancingParams::default()).is_err());
    }

    #[test]
    fn confidence_offset_absorbs_rounding() {
        assert_eq!(params(20, 0.3, 0, 5).confidence_offset(), 6);
        assert_eq!(params(10, 0.7, 0, 5).confidence_offset(), 7);
        assert_eq!(params(20, 0.51, 0, 5).confidence_offset(), 11);
        assert_eq!(params(20, 1.0, 0, 5).confidence_offset(), 20);
    }

    #[test]
    fn golden_table_matches() {
        let raw = include_str!("../testdata/balance_golden.json");
        let cases: Vec<serde_json::Value> = serde_json::from_str(raw).unwrap();
        assert_eq!(cases.len(), 40);
        for case in cases {
            let get = |k: &str| case[k].as_f64().unwrap();
            let p = params(get("b") as usize, get("c"), get("t1") as usize, get("t2") as usize);
            let got = alloc(get("t") as usize, p);
            assert_eq!(got, (get("n_repr") as usize, get("n_info") as usize), "{case}");
        }
    }

    proptest! {
        #[test]
        fn balance_parts_sum_to_b(t in 1usize..200, b in 1usize..64, c in 0.0f64..=1.0, t1 in 0usize..20, gap in 1usize..40) {
            let a = balance(t, &params(b, c, t1, t1 + gap)).unwrap();
            prop_assert_eq!(a.total(), b);
        }

        #[test]
        fn balance_transition_is_increasing(b in 2usize..64, t1 in 0usize..10, gap in 2usize..64) {
            let gap = gap.min(b);
            let p = params(b, 0.0, t1, t1 + gap);
            let lo = t1.max(1);
            let infos: Vec<usize> = (lo..t1 + gap).map(|t| balance(t, &p).unwrap().n_info).collect();
            prop_assert!(infos.windows(2).all(|w| w[0] < w[1]), "{:?}", infos);
        }

        #[test]
        fn entropy_permutation_invariant(raw in prop::collection::vec(0.0f64..1.0, 2..8), shift in 0usize..8) {
            let total: f64 = raw.iter().sum::<f64>() + 1e-3;
            let mut p: Vec<f64> = raw.iter().map(|v| (v + 1e-3 / raw.len() as f64) / total).collect();
            let s = p.iter().sum::<f64>();
            p.iter_mut().for_each(|v| *v /= s);
            let h = entropy(&p).unwrap();
            let mut q = p.clone();
            q.rotate_left(shift % p.len());
            q.reverse();
            prop_assert!((entropy(&q).unwrap() - h).abs() < 1e-12);
            prop_assert!(h <= (p.len() as f64).ln() + 1e-12);
        }

        #[test]
        fn scaled_allocation_keeps_size(n_repr in 0usize..30, n_info in 0usize..30, size in 0usize..60) {
            prop_assume!(n_repr + n_info > 0);
            let a = BatchAllocation { n_repr, n_info }.scaled_to(size);
            prop_assert_eq!(a.total(), size.min(n_repr + n_info));
            prop_assert!(a.n_repr <= n_repr && a.n_info <= n_info);
        }
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]).unwrap(), 0.0);
        let oracle = -(0.9f64 * 0.9f64.ln()) - 0.1 * 0.1f64.ln();
        assert!((entropy(&[0.9, 0.1]).unwrap() - oracle).abs() < 1e-15);
        assert!((entropy(&[0.9, 0.1]).unwrap() - 0.325083).abs() < 1e-6);
        assert!(entropy(&[0.5, 0.6]).is_err());
        assert!(entropy(&[1.2, -0.2]).is_err());
        assert!(entropy(&[]).is_err());
    }

    #[test]
    fn random_sampler_contract() {
        let pool: Vec<usize> = (100..1100).collect();
        let a = sample_random(&pool, 20, 1).unwrap();
        let b = sample_random(&pool, 20, 2).unwrap();
        assert_eq!(a, sample_random(&pool, 20, 1).unwrap());
        assert_ne!(a.indices(), b.indices());
        let set: BTreeSet<usize> = a.indices().into_iter().collect();
        assert_eq!(set.len(), 20);
        assert!(set.iter().all(|i| pool.contains(i)));
        let all = sample_random(&pool[..5], 20, 3).unwrap();
        let mut got = all.indices();
        got.sort();
        assert_eq!(got, pool[..5].to_vec());
        assert!(sample_random(&[], 3, 0).is_err());
    }

    #[test]
    fn random_sampler_is_uniform() {
        let pool: Vec<usize> = (0..10).collect();
        let mut counts = [0usize; 10];
        for draw in 0..10_000u64 {
            counts[sample_random(&pool, 1, derive_seed(77, draw)).unwrap().items[0].index] += 1;
        }
        // Binomial(10000, 0.1): sd = 30, so 1000 +- 120 is a 4-sd band.
        assert!(counts.iter().all(|&c| c.abs_diff(1000) <= 120), "{counts:?}");
    }

    fn two_blob_classifier() -> (Array2<f64>, CalibratedClassifier) {
        let x = array![[-2.0, 0.0], [-1.5, 0.2], [1.5, -0.1], [2.0, 0.0], [0.1, 0.0], [-0.2, 0.3], [3.0, 1.0]];
        let train_rows = x.select(Axis(0), &[0, 1, 2, 3]);
        let clf = train(train_rows.view(), &[0, 0, 1, 1], KernelParams::new(0.5, 1.0).unwrap()).unwrap();
        (x, clf)
    }

    #[test]
    fn max_entropy_matches_brute_force() {
        let (x, clf) = two_blob_classifier();
        let pool = vec![0, 1, 2, 3, 4, 5, 6];
        let batch = sample_max_entropy(&pool, x.view(), &clf, 3).unwrap();
        let mut oracle: Vec<(usize, f64)> = pool
            .iter()
            .map(|&i| {
                let p = clf.predict_proba(x.row(i)).unwrap();
                (i, -(p[0] * p[0].ln() + p[1] * p[1].ln()))
            })
            .collect();
        oracle.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (item, want) in batch.items.iter().zip(&oracle) {
            assert_eq!(item.index, want.0);
            assert!((item.score.unwrap() - want.1).abs() < 1e-12);
        }
        assert!(batch.items.iter().all(|q| q.provenance == Provenance::MaxEntropy));
    }

    #[test]
    fn max_entropy_all_ties_take_lowest_indices() {
        let x = Array2::from_shape_fn((6, 2), |(i, j)| (i + j) as f64);
        let clf = train(x.view(), &[0; 6], KernelParams::new(1.0, 1.0).unwrap()).unwrap();
        let batch = sample_max_entropy(&[5, 3, 1, 0, 4], x.view(), &clf, 3).unwrap();
        assert_eq!(batch.indices(), vec![0, 1, 3]);
    }

    #[test]
    fn kmedoids_sampler_one_per_blob() {
        let mut x = Array2::zeros((20, 2));
        for i in 0..20 {
            x[[i, 0]] = if i < 10 { 0.0 } else { 10.0 } + (i % 10) as f64 * 0.05;
            x[[i, 1]] = (i % 3) as f64 * 0.05;
        }
        let pool: Vec<usize> = (0..20).collect();
        let batch = sample_kmedoids(&pool, x.view(), 2, 4).unwrap();
        let idx = batch.indices();
        assert_eq!(idx.len(), 2);
        assert!(idx.iter().any(|&i| i < 10) && idx.iter().any(|&i| i >= 10));
        let sizes: f64 = batch.items.iter().map(|q| q.score.unwrap()).sum();
        assert_eq!(sizes, 20.0);

        let whole = sample_kmedoids(&[3, 7, 12], x.view(), 5, 0).unwrap();
        let mut got = whole.indices();
        got.sort();
        assert_eq!(got, vec![3, 7, 12]);
    }

    #[test]
    fn representative_falls_back_to_low_likelihood() {
        let mut rng = crate::rng::seeded(3);
        let x = Array2::from_shape_simple_fn((60, 2), || rand::Rng::sample(&mut rng, rand_distr::StandardNormal));
        let pool: Vec<usize> = (0..60).map(|i| i + 100).collect();
        let mut padded = Array2::zeros((160, 2));
        padded.slice_mut(ndarray::s![100.., ..]).assign(&x);
        let cfg = GmmFitConfig::default();
        let gmm = select_k(x.view(), &cfg.capped_for(60), 5).unwrap();
        let n_repr = gmm.k() + 2;
        let batch = sample_representative(&pool, padded.view(), n_repr, &cfg, 5).unwrap();

        let mean_dens = gmm.score_samples(gmm.means()).unwrap();
        let mut order: Vec<(usize, f64)> = mean_dens.iter().copied().enumerate().collect();
        order.sort_by(ascending_by_score);
        let mut expected = Vec::new();
        for (c, _) in order {
            let nearest = (0..60)
                .filter(|i| !expected.contains(i))
                .min_by(|&a, &b| {
                    let da: f64 = (&x.row(a) - &gmm.means().row(c)).mapv(|v| v * v).sum();
                    let db: f64 = (&x.row(b) - &gmm.means().row(c)).mapv(|v| v * v).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            expected.push(nearest);
        }
        let dens = gmm.score_samples(x.view()).unwrap();
        let mut rest: Vec<(usize, f64)> = (0..60).filter(|i| !expected.contains(i)).map(|i| (i, dens[i])).collect();
        rest.sort_by(ascending_by_score);
        expected.extend(rest.iter().take(2).map(|r| r.0));
        let expected: Vec<usize> = expected.into_iter().map(|i| i + 100).collect();
        assert_eq!(batch.indices(), expected);
        for (item, &i) in batch.items.iter().zip(&expected) {
            assert_eq!(item.provenance, Provenance::Representative);
            assert!((item.score.unwrap() - dens[i - 100]).abs() < 1e-12);
        }
    }

    #[test]
    fn representative_finds_anomaly_cluster() {
        let spec = SyntheticSpec::clustered_and_scattered(600);
        let cfg = GmmFitConfig::default();
        let mut hits = 0;
        for seed in 0..10 {
            let ds = make_synthetic(&spec, seed).unwrap();
            let pool: Vec<usize> = (0..ds.n()).collect();
            let batch = sample_representative(&pool, ds.features.view(), 5, &cfg, seed).unwrap();
            let set: BTreeSet<usize> = batch.indices().into_iter().collect();
            assert_eq!(set.len(), 5);
            if set.iter().any(|&i| ds.labels[i] == 1) {
                hits += 1;
            }
        }
        assert!(hits >= 8, "{hits}/10");
    }

    #[test]
    fn informative_full_share_uses_whole_pool() {
        let (x, clf) = two_blob_classifier();
        let pool = vec![0, 1, 2, 3, 4, 5, 6];
        let batch = sample_informative(&pool, x.view(), &clf, 7, 7, 0).unwrap();
        let mut got = batch.indices();
        got.sort();
        assert_eq!(got, pool);
        assert!(sample_informative(&pool, x.view(), &clf, 8, 8, 0).is_err());
    }

    #[test]
    fn informative_single_pick_is_nearest_candidate_mean() {
        let (x, clf) = two_blob_classifier();
        let pool = vec![0, 1, 2, 3, 4, 5, 6];
        // ceil(7 * 1 / 3) = 3 candidates.
        let batch = sample_informative(&pool, x.view(), &clf, 1, 3, 0).unwrap();
        let ent = entropies(&pool, x.view(), &clf).unwrap();
        let top: Vec<usize> = rank_by_entropy(&pool, &ent).into_iter().take(3).collect();
        let rows = x.select(Axis(0), &top);
        let mean = rows.mean_axis(Axis(0)).unwrap();
        let nearest = top
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da: f64 = (&x.row(a) - &mean).mapv(|v| v * v).sum();
                let db: f64 = (&x.row(b) - &mean).mapv(|v| v * v).sum();
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .unwrap();
        assert_eq!(batch.indices(), vec![nearest]);
    }

    #[test]
    fn informative_picks_one_per_boundary_cluster() {
        // Classifier boundary along x = 0; two groups straddle it far apart in y.
        let train_x = array![[-2.0, 0.0], [-2.0, 10.0], [2.0, 0.0], [2.0, 10.0], [-2.0, -10.0], [2.0, -10.0]];
        let clf = train(train_x.view(), &[0, 0, 1, 1, 0, 1], KernelParams::new(0.1, 10.0).unwrap()).unwrap();
        let mut pool_x = Vec::new();
        for &(cy, n) in &[(8.0, 5), (-8.0, 5)] {
            for i in 0..n {
                pool_x.extend([0.02 * i as f64 - 0.04, cy + 0.1 * i as f64]);
            }
        }
        for i in 0..10 {
            pool_x.extend([1.8 + 0.01 * i as f64, 0.0]);
        }
        let x = Array2::from_shape_vec((20, 2), pool_x).unwrap();
        let pool: Vec<usize> = (0..20).collect();
        let batch = sample_informative(&pool, x.view(), &clf, 2, 4, 3).unwrap();
        let idx = batch.indices();
        assert!(idx.iter().any(|&i| i < 5) && idx.iter().any(|&i| (5..10).contains(&i)), "{idx:?}");
    }

    fn adaptive_fixture() -> (crate::dataset::Dataset, CalibratedClassifier, Vec<usize>) {
        let ds = make_synthetic(&SyntheticSpec::clustered_and_scattered(400), 9).unwrap();
        let labeled = crate::dataset::init_labeled(&ds, 2, 9).unwrap();
        let clf = train(
            ds.rows(&labeled).view(),
            &labeled.iter().map(|&i| ds.labels[i]).collect::<Vec<_>>(),
            KernelParams::scale_heuristic(ds.rows(&labeled).view()),
        )
        .unwrap();
        let pool: Vec<usize> = (0..ds.n()).filter(|i| !labeled.contains(i)).collect();
        (ds, clf, pool)
    }

    #[test]
    fn adaptive_composition() {
        let (ds, clf, pool) = adaptive_fixture();
        let x = ds.features.view();
        let cfg = GmmFitConfig::default();
        let p = params(20, 0.0, 0, 5);

        let mid = sample_adaptive(&pool, x, &clf, 3, &p, &cfg, 11).unwrap();
        assert_eq!(mid.count(Provenance::Representative), 17);
        assert_eq!(mid.count(Provenance::Informative), 3);
        let set: BTreeSet<usize> = mid.indices().into_iter().collect();
        assert_eq!(set.len(), 20);
        assert!(set.iter().all(|i| pool.contains(i)));

        let late = sample_adaptive(&pool, x, &clf, 7, &p, &cfg, 11).unwrap();
        let info = sample_informative(&pool, x, &clf, 20, 20, derive_seed(11, 1)).unwrap();
        assert_eq!(late, info);

        let early_params = params(20, 0.0, 3, 8);
        let early = sample_adaptive(&pool, x, &clf, 1, &early_params, &cfg, 11).unwrap();
        let repr = sample_representative(&pool, x, 20, &cfg, derive_seed(11, 0)).unwrap();
        assert_eq!(early, repr);
    }

    #[test]
    fn adaptive_small_pool_scales_allocation() {
        let (ds, clf, pool) = adaptive_fixture();
        let small = &pool[..7];
        let batch =
            sample_adaptive(small, ds.features.view(), &clf, 3, &params(20, 0.0, 0, 5), &GmmFitConfig::default(), 1)
                .unwrap();
        // (17, 3) scaled to 7: floors (5, 1), remainder to the larger share.
        assert_eq!(batch.count(Provenance::Representative), 6);
        assert_eq!(batch.count(Provenance::Informative), 1);
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert_eq!("Max-Entropy".parse::<StrategyKind>().unwrap(), StrategyKind::MaxEntropy);
        assert!("pam".parse::<StrategyKind>().is_err());
    }
}

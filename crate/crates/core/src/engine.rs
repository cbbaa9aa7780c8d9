//! The active-learning loop: sessions that alternate batch proposals and label
//! submissions, a ground-truth oracle, and the repeated-run experiment driver.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{train, CalibratedClassifier, KernelParams};
use crate::dataset::{init_labeled_within, standardize, stratified_split, Dataset};
use crate::metrics::{discovery_count, prauc, MetricsRecord};
use crate::mixture::GmmFitConfig;
use crate::rng::derive_seed;
use crate::strategies::{
    balance, sample_adaptive, sample_informative, sample_kmedoids, sample_max_entropy, sample_random, BalancingParams,
    BatchAllocation, QueryBatch, StrategyKind,
};
use crate::{Error, Result};

const SPLIT_STREAM: u64 = 1;
const SEED_STREAM: u64 = 2;
const BATCH_STREAM: u64 = 3;

/// Where labels come from. Replay sessions hold out a stratified test split
/// and report PRAUC on it; human sessions use every row as pool.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    Replay,
    #[default]
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub strategy: StrategyKind,
    pub balancing: BalancingParams,
    /// Size of the initial labeled set, split evenly between the classes.
    pub initial_labeled: usize,
    pub mode: SessionMode,
    pub test_fraction: f64,
    #[serde(default)]
    pub gmm: GmmFitConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            strategy: StrategyKind::Adaptive,
            balancing: BalancingParams::default(),
            initial_labeled: 4,
            mode: SessionMode::Replay,
            test_fraction: 0.2,
            gmm: GmmFitConfig::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.balancing.validate()?;
        self.gmm.validate()?;
        if self.initial_labeled < 2 || !self.initial_labeled.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "initial labeled size must be an even number >= 2, got {}",
                self.initial_labeled
            )));
        }
        if self.mode == SessionMode::Replay && !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid(format!("test fraction {} outside (0, 1)", self.test_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub session: SessionConfig,
    /// Iteration budget per run.
    pub iterations: usize,
    pub runs: usize,
    pub base_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.session.validate()?;
        if self.session.mode != SessionMode::Replay {
            return Err(Error::invalid("experiments run in replay mode"));
        }
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingBatch {
    pub iteration: usize,
    /// The representative/informative split, for adaptive sessions.
    pub allocation: Option<BatchAllocation>,
    pub batch: QueryBatch,
    pub sampling_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamChange {
    pub iteration: usize,
    pub previous: BalancingParams,
    pub next: BalancingParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingBatch,
    AwaitingLabels,
    Finished,
}

/// State of one labeling session. The per-iteration sampler seed is derived
/// from `seed` and `t`, so the state carries no generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ALSession {
    pub id: String,
    pub dataset: String,
    pub dataset_rows: usize,
    pub config: SessionConfig,
    pub seed: u64,
    pub t: usize,
    pub test: Vec<usize>,
    pub labeled: BTreeMap<usize, u8>,
    pub unlabeled: Vec<usize>,
    pub model: CalibratedClassifier,
    pub pending: Option<PendingBatch>,
    pub history: Vec<MetricsRecord>,
    pub param_log: Vec<ParamChange>,
}

impl ALSession {
    /// Splits (replay mode), seeds the labeled set from the dataset's labels and
    /// trains the initial model.
    pub fn init(id: impl Into<String>, ds: &Dataset, config: SessionConfig, seed: u64) -> Result<Self> {
        let started = Instant::now();
        config.validate()?;
        let (train_rows, test) = match config.mode {
            SessionMode::Replay => {
                let split = stratified_split(ds, config.test_fraction, derive_seed(seed, SPLIT_STREAM))?;
                (split.train, split.test)
            }
            SessionMode::Human => ((0..ds.n()).collect(), Vec::new()),
        };
        let seed_rows =
            init_labeled_within(&ds.labels, &train_rows, config.initial_labeled / 2, derive_seed(seed, SEED_STREAM))?;
        let labeled: BTreeMap<usize, u8> = seed_rows.iter().map(|&i| (i, ds.labels[i])).collect();
        let unlabeled = train_rows.into_iter().filter(|i| !labeled.contains_key(i)).collect();
        let model = fit_model(ds, &labeled)?;
        let mut session = Self {
            id: id.into(),
            dataset: ds.name.clone(),
            dataset_rows: ds.n(),
            config,
            seed,
            t: 1,
            test,
            labeled,
            unlabeled,
            model,
            pending: None,
            history: Vec::new(),
            param_log: Vec::new(),
        };
        let record = session.evaluate(ds, 0, elapsed_ms(started))?;
        session.history.push(record);
        Ok(session)
    }

    pub fn status(&self) -> SessionStatus {
        if self.pending.is_some() {
            SessionStatus::AwaitingLabels
        } else if self.unlabeled.is_empty() {
            SessionStatus::Finished
        } else {
            SessionStatus::AwaitingBatch
        }
    }

    /// Allocation the adaptive sampler would use for the next batch.
    pub fn next_allocation(&self) -> Result<Option<BatchAllocation>> {
        if self.config.strategy != StrategyKind::Adaptive {
            return Ok(None);
        }
        Ok(Some(balance(self.t, &self.config.balancing)?.scaled_to(self.unlabeled.len())))
    }

    fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        if ds.name != self.dataset || ds.n() != self.dataset_rows {
            return Err(Error::invalid(format!(
                "session belongs to dataset '{}' ({} rows), got '{}' ({} rows)",
                self.dataset,
                self.dataset_rows,
                ds.name,
                ds.n()
            )));
        }
        Ok(())
    }

    /// Chooses the next batch and holds it until labels arrive. Labeled and
    /// unlabeled sets are not touched.
    pub fn propose_batch(&mut self, ds: &Dataset) -> Result<&PendingBatch> {
        self.check_dataset(ds)?;
        if self.pending.is_some() {
            return Err(Error::BatchPending);
        }
        if self.unlabeled.is_empty() {
            return Err(Error::PoolExhausted);
        }
        let started = Instant::now();
        let cfg = &self.config;
        let pool = &self.unlabeled;
        let x = ds.features.view();
        let b = cfg.balancing.b;
        let seed = derive_seed(derive_seed(self.seed, BATCH_STREAM), self.t as u64);
        let batch = match cfg.strategy {
            StrategyKind::Adaptive => sample_adaptive(pool, x, &self.model, self.t, &cfg.balancing, &cfg.gmm, seed)?,
            StrategyKind::Random => sample_random(pool, b, seed)?,
            StrategyKind::MaxEntropy => sample_max_entropy(pool, x, &self.model, b)?,
            StrategyKind::Kmedoids => sample_kmedoids(pool, x, b, seed)?,
            StrategyKind::Informative => {
                let size = b.min(pool.len());
                sample_informative(pool, x, &self.model, size, size, seed)?
            }
        };
        let allocation = self.next_allocation()?;
        Ok(self.pending.insert(PendingBatch { iteration: self.t, allocation, batch, sampling_ms: elapsed_ms(started) }))
    }

    /// Drops the pending batch without labeling it.
    pub fn cancel_batch(&mut self) -> Result<()> {
        self.pending.take().map(|_| ()).ok_or(Error::NoPendingBatch)
    }

    /// Accepts labels for exactly the pending batch, retrains from scratch and
    /// records metrics. On any error the session is left unchanged.
    pub fn submit_labels(&mut self, ds: &Dataset, answers: &BTreeMap<usize, u8>) -> Result<&MetricsRecord> {
        self.check_dataset(ds)?;
        let pending = self.pending.as_ref().ok_or(Error::NoPendingBatch)?;
        let started = Instant::now();
        let expected: BTreeSet<usize> = pending.batch.indices().into_iter().collect();
        let given: BTreeSet<usize> = answers.keys().copied().collect();
        if expected != given {
            let missing: Vec<_> = expected.difference(&given).collect();
            let extra: Vec<_> = given.difference(&expected).collect();
            return Err(Error::AnswerMismatch(format!("missing {missing:?}, not in batch {extra:?}")));
        }
        if let Some((_, &bad)) = answers.iter().find(|(_, &l)| l > 1) {
            return Err(Error::InvalidLabel(bad as i64));
        }
        let mut labeled = self.labeled.clone();
        labeled.extend(answers.iter().map(|(&i, &l)| (i, l)));
        let model = fit_model(ds, &labeled)?;
        let sampling_ms = pending.sampling_ms;

        let mut next = Self {
            labeled,
            model,
            pending: None,
            unlabeled: self.unlabeled.iter().copied().filter(|i| !given.contains(i)).collect(),
            t: self.t + 1,
            ..self.clone()
        };
        let record = next.evaluate(ds, self.t, sampling_ms + elapsed_ms(started))?;
        next.history.push(record);
        *self = next;
        Ok(self.history.last().expect("just pushed"))
    }

    /// Replaces the balancing parameters; only allowed between batches.
    pub fn set_balancing(&mut self, params: BalancingParams) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::BatchPending);
        }
        params.validate()?;
        if params != self.config.balancing {
            self.param_log.push(ParamChange { iteration: self.t, previous: self.config.balancing, next: params });
            self.config.balancing = params;
        }
        Ok(())
    }

    fn evaluate(&self, ds: &Dataset, iteration: usize, wall_time_ms: f64) -> Result<MetricsRecord> {
        let (prauc, anomalies_discovered) = match self.config.mode {
            SessionMode::Replay => {
                let x = ds.rows(&self.test);
                let truth: Vec<u8> = self.test.iter().map(|&i| ds.labels[i]).collect();
                let scores = self.model.anomaly_scores(x.view())?;
                let value = prauc(scores.as_slice().expect("contiguous"), &truth)?;
                (Some(value), discovery_count(self.labeled.keys().copied(), &ds.labels)?)
            }
            SessionMode::Human => (None, self.labeled.values().filter(|&&l| l == 1).count()),
        };
        Ok(MetricsRecord { iteration, labels_used: self.labeled.len(), prauc, anomalies_discovered, wall_time_ms })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn fit_model(ds: &Dataset, labeled: &BTreeMap<usize, u8>) -> Result<CalibratedClassifier> {
    let rows: Vec<usize> = labeled.keys().copied().collect();
    let x = ds.rows(&rows);
    let y: Vec<u8> = labeled.values().copied().collect();
    train(x.view(), &y, KernelParams::scale_heuristic(x.view()))
}

fn elapsed_ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Simulated annotator answering from ground truth.
#[derive(Debug, Clone, Copy)]
pub struct Oracle<'a> {
    truth: &'a [u8],
}

impl<'a> Oracle<'a> {
    pub fn new(truth: &'a [u8]) -> Self {
        Self { truth }
    }

    pub fn answer(&self, batch: &QueryBatch) -> Result<BTreeMap<usize, u8>> {
        batch
            .items
            .iter()
            .map(|q| match self.truth.get(q.index) {
                Some(&l) => Ok((q.index, l)),
                None => Err(Error::invalid(format!("oracle asked about unknown row {}", q.index))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub run: usize,
    pub seed: u64,
    pub records: Vec<MetricsRecord>,
    /// The pool ran out before the iteration budget was spent.
    pub truncated: bool,
}

/// Runs one oracle-labeled session for `iterations` rounds or until the pool empties.
pub fn run_session(
    ds: &Dataset,
    config: &SessionConfig,
    iterations: usize,
    run: usize,
    seed: u64,
) -> Result<RunSeries> {
    let mut session = ALSession::init(format!("run-{run}"), ds, config.clone(), seed)?;
    let oracle = Oracle::new(&ds.labels);
    let mut completed = 0;
    while completed < iterations && !session.unlabeled.is_empty() {
        let answers = oracle.answer(&session.propose_batch(ds)?.batch)?;
        session.submit_labels(ds, &answers)?;
        completed += 1;
    }
    Ok(RunSeries { run, seed, records: session.history, truncated: completed < iterations })
}

/// Repeats the experiment `runs` times with seeds `base_seed + r`. Runs execute
/// in parallel; results come back in run order. Features are standardized first.
pub fn run_experiment(ds: &Dataset, cfg: &ExperimentConfig) -> Result<Vec<RunSeries>> {
    cfg.validate()?;
    if ds.anomaly_count() == 0 || ds.anomaly_count() == ds.n() {
        return Err(Error::invalid(format!("dataset '{}' needs both classes for oracle experiments", ds.name)));
    }
    let ds = standardize(ds);
    (0..cfg.runs)
        .into_par_iter()
        .map(|r| run_session(&ds, &cfg.session, cfg.iterations, r, cfg.base_seed.wrapping_add(r as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_synthetic, SyntheticSpec};
    use crate::strategies::Provenance;

    fn dataset() -> Dataset {
        standardize(&make_synthetic(&SyntheticSpec::clustered_and_scattered(500), 4).unwrap())
    }

    fn config(strategy: StrategyKind) -> SessionConfig {
        SessionConfig { strategy, ..SessionConfig::default() }
    }

    fn zero_clock(mut s: ALSession) -> ALSession {
        s.history.iter_mut().for_each(|r| r.wall_time_ms = 0.0);
        if let Some(p) = s.pending.as_mut() {
            p.sampling_ms = 0.0;
        }
        s
    }

    #[test]
    fn init_partitions_rows() {
        let ds = dataset();
        let s = ALSession::init("a", &ds, config(StrategyKind::Random), 3).unwrap();
        assert_eq!(s.labeled.len(), 4);
        assert_eq!(s.labeled.values().filter(|&&l| l == 1).count(), 2);
        assert_eq!(s.test.len(), 100);
        assert_eq!(s.unlabeled.len(), 400 - 4);
        assert_eq!(s.history.len(), 1);
        assert_eq!(s.history[0].labels_used, 4);
        assert_eq!(s.history[0].anomalies_discovered, 2);
        assert!(s.history[0].prauc.is_some());
        assert_eq!(s.status(), SessionStatus::AwaitingBatch);
        let same = ALSession::init("a", &ds, config(StrategyKind::Random), 3).unwrap();
        assert_eq!(zero_clock(s).to_json().unwrap(), zero_clock(same).to_json().unwrap());
    }

    #[test]
    fn init_with_twenty_seeds() {
        let ds = standardize(&make_synthetic(&SyntheticSpec::balanced_standin(), 1).unwrap());
        let cfg = SessionConfig { initial_labeled: 20, ..config(StrategyKind::MaxEntropy) };
        let s = ALSession::init("x", &ds, cfg, 1).unwrap();
        assert_eq!(s.labeled.len(), 20);
    }

    #[test]
    fn human_mode_has_no_test_split() {
        let ds = dataset();
        let cfg = SessionConfig { mode: SessionMode::Human, ..config(StrategyKind::Random) };
        let s = ALSession::init("h", &ds, cfg, 3).unwrap();
        assert!(s.test.is_empty());
        assert_eq!(s.unlabeled.len(), ds.n() - 4);
        assert_eq!(s.history[0].prauc, None);
    }

    #[test]
    fn config_validation() {
        let ds = dataset();
        for bad in [
            SessionConfig { initial_labeled: 3, ..SessionConfig::default() },
            SessionConfig { initial_labeled: 0, ..SessionConfig::default() },
            SessionConfig { test_fraction: 1.0, ..SessionConfig::default() },
        ] {
            assert!(ALSession::init("x", &ds, bad, 0).is_err());
        }
    }

    #[test]
    fn first_adaptive_batch_allocation() {
        let ds = dataset();
        let mut s = ALSession::init("a", &ds, config(StrategyKind::Adaptive), 5).unwrap();
        let pending = s.propose_batch(&ds).unwrap().clone();
        assert_eq!(pending.allocation, Some(BatchAllocation { n_repr: 19, n_info: 1 }));
        assert_eq!(pending.batch.count(Provenance::Representative), 19);
        assert_eq!(pending.batch.count(Provenance::Informative), 1);
        assert!(matches!(s.propose_batch(&ds), Err(Error::BatchPending)));
        assert_eq!(s.status(), SessionStatus::AwaitingLabels);
    }

    #[test]
    fn submit_bookkeeping_and_atomicity() {
        let ds = dataset();
        let mut s = ALSession::init("a", &ds, config(StrategyKind::Random), 5).unwrap();
        assert!(matches!(s.submit_labels(&ds, &BTreeMap::new()), Err(Error::NoPendingBatch)));
        let batch = s.propose_batch(&ds).unwrap().batch.clone();
        let answers = Oracle::new(&ds.labels).answer(&batch).unwrap();
        for (&i, &l) in &answers {
            assert_eq!(l, ds.labels[i]);
        }

        let before = s.clone();
        let mut superset = answers.clone();
        superset.insert(*s.labeled.keys().next().unwrap(), 0);
        assert!(matches!(s.submit_labels(&ds, &superset), Err(Error::AnswerMismatch(_))));
        let mut partial = answers.clone();
        partial.pop_first();
        assert!(matches!(s.submit_labels(&ds, &partial), Err(Error::AnswerMismatch(_))));
        let mut invalid = answers.clone();
        *invalid.values_mut().next().unwrap() = 2;
        assert!(matches!(s.submit_labels(&ds, &invalid), Err(Error::InvalidLabel(2))));
        assert_eq!(s, before);

        let record = s.submit_labels(&ds, &answers).unwrap().clone();
        assert_eq!(record.iteration, 1);
        assert_eq!(record.labels_used, 24);
        assert_eq!(s.labeled.len(), 24);
        assert_eq!(s.t, 2);
        assert_eq!(s.labeled.len() + s.unlabeled.len(), 400);
        assert!(s.pending.is_none());
    }

    #[test]
    fn small_pool_gives_short_batch() {
        let ds = dataset();
        let mut s = ALSession::init("a", &ds, config(StrategyKind::Random), 5).unwrap();
        s.unlabeled.truncate(7);
        assert_eq!(s.propose_batch(&ds).unwrap().batch.len(), 7);
        let answers = Oracle::new(&ds.labels).answer(&s.pending.as_ref().unwrap().batch).unwrap();
        s.submit_labels(&ds, &answers).unwrap();
        assert_eq!(s.status(), SessionStatus::Finished);
        assert!(matches!(s.propose_batch(&ds), Err(Error::PoolExhausted)));
    }

    #[test]
    fn steering_changes_next_allocation() {
        let ds = dataset();
        let mut s = ALSession::init("a", &ds, config(StrategyKind::Adaptive), 5).unwrap();
        s.t = 3;
        s.set_balancing(BalancingParams::new(20, 0.5, 0, 5).unwrap()).unwrap();
        assert_eq!(s.next_allocation().unwrap(), Some(BatchAllocation { n_repr: 7, n_info: 13 }));
        assert_eq!(s.param_log.len(), 1);
        s.set_balancing(BalancingParams::new(20, 0.5, 0, 2).unwrap()).unwrap();
        assert_eq!(s.next_allocation().unwrap(), Some(BatchAllocation { n_repr: 0, n_info: 20 }));
        s.propose_batch(&ds).unwrap();
        assert!(matches!(s.set_balancing(BalancingParams::default()), Err(Error::BatchPending)));
    }

    #[test]
    fn late_adaptive_equals_informative() {
        let ds = dataset();
        let mut adaptive = ALSession::init("a", &ds, config(StrategyKind::Adaptive), 8).unwrap();
        adaptive.t = 6;
        let batch = adaptive.propose_batch(&ds).unwrap().batch.clone();
        let seed = derive_seed(derive_seed(8, BATCH_STREAM), 6);
        let info =
            sample_informative(&adaptive.unlabeled, ds.features.view(), &adaptive.model, 20, 20, derive_seed(seed, 1))
                .unwrap();
        assert_eq!(batch, info);
    }

    #[test]
    fn snapshot_round_trip_continues_identically() {
        let ds = dataset();
        let oracle = Oracle::new(&ds.labels);
        let mut a = ALSession::init("a", &ds, config(StrategyKind::Adaptive), 2).unwrap();
        let answers = oracle.answer(&a.propose_batch(&ds).unwrap().batch).unwrap();
        a.submit_labels(&ds, &answers).unwrap();
        a.propose_batch(&ds).unwrap();

        let mut restored = ALSession::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(restored, a);
        for s in [&mut a, &mut restored] {
            let answers = oracle.answer(&s.pending.as_ref().unwrap().batch).unwrap();
            s.submit_labels(&ds, &answers).unwrap();
            s.propose_batch(&ds).unwrap();
        }
        assert_eq!(zero_clock(a), zero_clock(restored));
    }

    #[test]
    fn experiment_shape_and_determinism() {
        let ds = dataset();
        let cfg = ExperimentConfig {
            dataset: ds.name.clone(),
            session: config(StrategyKind::Random),
            iterations: 3,
            runs: 2,
            base_seed: 10,
        };
        let a = run_experiment(&ds, &cfg).unwrap();
        assert_eq!(a.len(), 2);
        for (r, series) in a.iter().enumerate() {
            assert_eq!(series.run, r);
            assert_eq!(series.seed, 10 + r as u64);
            assert_eq!(series.records.len(), 4);
            assert_eq!(series.records.last().unwrap().labels_used, 64);
            assert!(!series.truncated);
            assert!(series.records.windows(2).all(|w| w[0].anomalies_discovered <= w[1].anomalies_discovered));
        }
        let strip = |v: Vec<RunSeries>| {
            v.into_iter()
                .map(|mut s| {
                    s.records.iter_mut().for_each(|r| r.wall_time_ms = 0.0);
                    s
                })
                .collect::<Vec<_>>()
        };
        let b = run_experiment(&ds, &cfg).unwrap();
        assert_eq!(strip(a.clone()), strip(b));

        let adaptive =
            run_experiment(&ds, &ExperimentConfig { session: config(StrategyKind::Adaptive), ..cfg }).unwrap();
        for (x, y) in a.iter().zip(&adaptive) {
            assert_eq!(x.records[0].prauc, y.records[0].prauc);
        }
    }

    #[test]
    fn exhausted_pool_truncates_run() {
        let ds = standardize(&make_synthetic(&SyntheticSpec::single_blob(2, 40, 3, 2, 6.0), 1).unwrap());
        let cfg =
            SessionConfig { balancing: BalancingParams::new(10, 0.0, 0, 5).unwrap(), ..config(StrategyKind::Random) };
        let series = run_session(&ds, &cfg, 10, 0, 1).unwrap();
        assert!(series.truncated);
        let last = series.records.last().unwrap();
        assert_eq!(last.labels_used, ds.n() - ds.n() / 5);
    }

    #[test]
    fn no_index_queried_twice() {
        let ds = dataset();
        let mut s = ALSession::init("a", &ds, config(StrategyKind::Kmedoids), 1).unwrap();
        let oracle = Oracle::new(&ds.labels);
        let mut seen = BTreeSet::new();
        for _ in 0..4 {
            let batch = s.propose_batch(&ds).unwrap().batch.clone();
            for i in batch.indices() {
                assert!(seen.insert(i));
                assert!(!s.test.contains(&i));
            }
            s.submit_labels(&ds, &oracle.answer(&batch).unwrap()).unwrap();
        }
    }
}

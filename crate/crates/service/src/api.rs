//! Request and response bodies of the `/v1` API.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use adabal_core::dataset::Dataset;
use adabal_core::engine::{ALSession, ParamChange, SessionMode, SessionStatus};
use adabal_core::metrics::MetricsRecord;
use adabal_core::strategies::{BalancingParams, BatchAllocation, Provenance, StrategyKind};
use adabal_core::Result;

fn default_strategy() -> StrategyKind {
    StrategyKind::Adaptive
}
fn default_b() -> usize {
    20
}
fn default_m() -> usize {
    4
}
fn default_t2() -> usize {
    5
}
fn default_test_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub dataset: String,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyKind,
    #[serde(default = "default_b")]
    pub b: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub t1: usize,
    #[serde(default = "default_t2")]
    pub t2: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: SessionMode,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsPatch {
    pub c: Option<f64>,
    pub t1: Option<usize>,
    pub t2: Option<usize>,
}

impl ParamsPatch {
    pub fn apply(&self, current: BalancingParams) -> BalancingParams {
        BalancingParams {
            c: self.c.unwrap_or(current.c),
            t1: self.t1.unwrap_or(current.t1),
            t2: self.t2.unwrap_or(current.t2),
            ..current
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSubmission {
    /// Row index (as a string key) to label; values are checked by the handler.
    pub labels: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSizes {
    pub labeled: usize,
    pub unlabeled: usize,
    pub test: usize,
}

impl PoolSizes {
    pub fn of(s: &ALSession) -> Self {
        Self { labeled: s.labeled.len(), unlabeled: s.unlabeled.len(), test: s.test.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub index: usize,
    pub provenance: Provenance,
    pub score: Option<f64>,
    pub p_anomaly: f64,
    /// Standardized values, as the models see them.
    pub features: Vec<f64>,
    pub raw_features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchPayload {
    pub session_id: String,
    pub iteration: usize,
    pub allocation: Option<BatchAllocation>,
    pub items: Vec<BatchEntry>,
}

impl BatchPayload {
    /// Payload of the session's pending batch, if any.
    pub fn pending(s: &ALSession, standardized: &Dataset, raw: &Dataset) -> Result<Option<Self>> {
        let Some(p) = &s.pending else { return Ok(None) };
        let items = p
            .batch
            .items
            .iter()
            .map(|q| {
                Ok(BatchEntry {
                    index: q.index,
                    provenance: q.provenance,
                    score: q.score,
                    p_anomaly: s.model.predict_proba(standardized.row(q.index))?[1],
                    features: standardized.row(q.index).to_vec(),
                    raw_features: raw.row(q.index).to_vec(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Some(Self { session_id: s.id.clone(), iteration: p.iteration, allocation: p.allocation, items }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResource {
    pub id: String,
    pub dataset: String,
    pub status: SessionStatus,
    pub mode: SessionMode,
    pub strategy: StrategyKind,
    pub iteration: usize,
    pub params: BalancingParams,
    /// Split the adaptive strategy will use for the next batch.
    pub next_allocation: Option<BatchAllocation>,
    pub pending: Option<BatchPayload>,
    pub pool: PoolSizes,
    pub latest: MetricsRecord,
    pub prauc_available: bool,
}

impl SessionResource {
    pub fn of(s: &ALSession, standardized: &Dataset, raw: &Dataset) -> Result<Self> {
        Ok(Self {
            id: s.id.clone(),
            dataset: s.dataset.clone(),
            status: s.status(),
            mode: s.config.mode,
            strategy: s.config.strategy,
            iteration: s.t,
            params: s.config.balancing,
            next_allocation: s.next_allocation()?,
            pending: BatchPayload::pending(s, standardized, raw)?,
            pool: PoolSizes::of(s),
            latest: s.history.last().expect("history starts with the initial record").clone(),
            prauc_available: s.config.mode == SessionMode::Replay,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsView {
    pub id: String,
    pub history: Vec<MetricsRecord>,
    pub pool: PoolSizes,
    pub prauc_available: bool,
    pub param_log: Vec<ParamChange>,
}

impl MetricsView {
    pub fn of(s: &ALSession) -> Self {
        Self {
            id: s.id.clone(),
            history: s.history.clone(),
            pool: PoolSizes::of(s),
            prauc_available: s.config.mode == SessionMode::Replay,
            param_log: s.param_log.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub dataset: String,
    pub status: SessionStatus,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub anomalies: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceQuery {
    pub t: usize,
    pub b: usize,
    pub c: f64,
    pub t1: usize,
    pub t2: usize,
}

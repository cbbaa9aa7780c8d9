//! HTTP session API over the active-learning engine.
//!
//! Every endpoint lives under `/v1`. A session is mutated by one request at a
//! time; each accepted mutation is written to the state directory before it
//! becomes visible, so a restarted server resumes exactly where it stopped.

pub mod api;
mod error;
mod store;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};

use adabal_core::dataset::{standardize, Dataset};
use adabal_core::engine::{ALSession, SessionConfig};
use adabal_core::metrics::MetricsRecord;
use adabal_core::strategies::{balance, BalancingParams, BatchAllocation};
use adabal_core::Error as CoreError;

use api::*;
pub use error::ApiError;
pub use store::SnapshotStore;

/// JSON Schema of every request and response body.
pub const SCHEMA: &str = include_str!("../schema/api.schema.json");

type ApiResult<T> = Result<T, ApiError>;

struct DatasetHandle {
    raw: Dataset,
    standardized: Dataset,
}

struct SessionEntry {
    /// Serializes mutations. Holds the authoritative state.
    guard: Mutex<ALSession>,
    /// Last committed state, for readers that must not wait on a mutation.
    published: RwLock<Arc<ALSession>>,
    dataset: Arc<DatasetHandle>,
}

pub struct AppState {
    datasets: BTreeMap<String, Arc<DatasetHandle>>,
    sessions: RwLock<HashMap<String, Arc<SessionEntry>>>,
    store: Option<SnapshotStore>,
}

impl AppState {
    /// Registers datasets (standardized here) and restores any snapshots found
    /// in `state_dir`.
    pub fn new(datasets: Vec<Dataset>, state_dir: Option<PathBuf>) -> adabal_core::Result<Self> {
        let mut handles = BTreeMap::new();
        for raw in datasets {
            let standardized = standardize(&raw);
            if handles.insert(raw.name.clone(), Arc::new(DatasetHandle { raw, standardized })).is_some() {
                return Err(CoreError::InvalidInput("duplicate dataset name".into()));
            }
        }
        let store = state_dir.map(SnapshotStore::open).transpose()?;
        let mut sessions = HashMap::new();
        if let Some(store) = &store {
            for session in store.load_all()? {
                match handles.get(&session.dataset) {
                    Some(ds) if ds.raw.n() == session.dataset_rows => {
                        log::info!("restored session {} at iteration {}", session.id, session.t);
                        sessions.insert(session.id.clone(), Arc::new(entry(session, ds.clone())));
                    }
                    _ => log::warn!("skipping session {}: dataset '{}' is not loaded", session.id, session.dataset),
                }
            }
        }
        Ok(Self { datasets: handles, sessions: RwLock::new(sessions), store })
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().len()
    }

    fn session(&self, id: &str) -> ApiResult<Arc<SessionEntry>> {
        self.sessions.read().get(id).cloned().ok_or_else(|| ApiError::not_found(format!("no session '{id}'")))
    }

    fn persist(&self, s: &ALSession) -> ApiResult<()> {
        if let Some(store) = &self.store {
            store.save(s).map_err(|e| ApiError::internal(format!("snapshot write failed: {e}")))?;
        }
        Ok(())
    }
}

fn entry(session: ALSession, dataset: Arc<DatasetHandle>) -> SessionEntry {
    SessionEntry { published: RwLock::new(Arc::new(session.clone())), guard: Mutex::new(session), dataset }
}

/// Runs `op` on a copy of the session under its mutation guard. The copy is
/// persisted and then committed; on error nothing changes.
async fn mutate<T, F>(state: Arc<AppState>, id: String, op: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&mut ALSession, &DatasetHandle) -> ApiResult<T> + Send + 'static,
{
    let entry = state.session(&id)?;
    tokio::task::spawn_blocking(move || {
        let mut guard = entry.guard.lock();
        let mut next = guard.clone();
        let out = op(&mut next, &entry.dataset)?;
        state.persist(&next)?;
        *entry.published.write() = Arc::new(next.clone());
        *guard = next;
        Ok(out)
    })
    .await
    .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

pub fn router(state: Arc<AppState>) -> Router {
    let v1 = Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/schema", get(|| async { ([(header::CONTENT_TYPE, "application/schema+json")], SCHEMA) }))
        .route("/datasets", get(list_datasets))
        .route("/balance", get(balance_preview))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/batch", post(propose_batch))
        .route("/sessions/{id}/labels", post(submit_labels))
        .route("/sessions/{id}/params", axum::routing::patch(patch_params))
        .route("/sessions/{id}/metrics", get(get_metrics))
        .route("/sessions/{id}/snapshot", get(get_snapshot));
    Router::new().nest("/v1", v1).with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

async fn list_datasets(State(state): State<Arc<AppState>>) -> Json<Vec<DatasetInfo>> {
    Json(
        state
            .datasets
            .values()
            .map(|h| DatasetInfo {
                name: h.raw.name.clone(),
                n: h.raw.n(),
                d: h.raw.d(),
                anomalies: h.raw.anomaly_count(),
            })
            .collect(),
    )
}

async fn balance_preview(query: Result<Query<BalanceQuery>, QueryRejection>) -> ApiResult<Json<BatchAllocation>> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let params = BalancingParams::new(q.b, q.c, q.t1, q.t2)?;
    Ok(Json(balance(q.t, &params)?))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionResource>)> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let dataset = state
        .datasets
        .get(&req.dataset)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("no dataset '{}'", req.dataset)))?;
    let config = SessionConfig {
        strategy: req.strategy,
        balancing: BalancingParams::new(req.b, req.c, req.t1, req.t2)?,
        initial_labeled: req.m,
        mode: req.mode,
        test_fraction: req.test_fraction,
        ..SessionConfig::default()
    };
    config.validate()?;
    let state2 = state.clone();
    let resource = tokio::task::spawn_blocking(move || -> ApiResult<SessionResource> {
        let id = uuid::Uuid::new_v4().to_string();
        let session = ALSession::init(id.clone(), &dataset.standardized, config, req.seed)?;
        state2.persist(&session)?;
        let resource = SessionResource::of(&session, &dataset.standardized, &dataset.raw)?;
        state2.sessions.write().insert(id, Arc::new(entry(session, dataset)));
        Ok(resource)
    })
    .await
    .map_err(|e| ApiError::internal(format!("worker failed: {e}")))??;
    Ok((StatusCode::CREATED, Json(resource)))
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Json<Vec<SessionSummary>> {
    let mut out: Vec<SessionSummary> = state
        .sessions
        .read()
        .values()
        .map(|e| {
            let s = e.published.read().clone();
            SessionSummary { id: s.id.clone(), dataset: s.dataset.clone(), status: s.status(), iteration: s.t }
        })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Json(out)
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionResource>> {
    let entry = state.session(&id)?;
    let s = entry.published.read().clone();
    Ok(Json(SessionResource::of(&s, &entry.dataset.standardized, &entry.dataset.raw)?))
}

async fn get_metrics(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<MetricsView>> {
    let s = state.session(&id)?.published.read().clone();
    Ok(Json(MetricsView::of(&s)))
}

async fn get_snapshot(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let s = state.session(&id)?.published.read().clone();
    let body = s.to_json()?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body))
}

async fn propose_batch(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<BatchPayload>> {
    let payload = mutate(state, id, |s, ds| {
        s.propose_batch(&ds.standardized)?;
        Ok(BatchPayload::pending(s, &ds.standardized, &ds.raw)?.expect("batch just proposed"))
    })
    .await?;
    Ok(Json(payload))
}

/// Turns the JSON label map into row indices and 0/1 labels.
fn parse_labels(sub: &LabelSubmission) -> ApiResult<BTreeMap<usize, u8>> {
    sub.labels
        .iter()
        .map(|(k, v)| {
            let index: usize = k.parse().map_err(|_| ApiError::unprocessable(format!("'{k}' is not a row index")))?;
            let label = match v.as_i64() {
                Some(l @ (0 | 1)) => l as u8,
                Some(l) => return Err(CoreError::InvalidLabel(l).into()),
                None => return Err(ApiError::unprocessable(format!("label for row {index} must be 0 or 1, got {v}"))),
            };
            Ok((index, label))
        })
        .collect()
}

async fn submit_labels(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<LabelSubmission>, JsonRejection>,
) -> ApiResult<Json<MetricsRecord>> {
    let record = mutate(state, id, move |s, ds| {
        if s.pending.is_none() {
            return Err(CoreError::NoPendingBatch.into());
        }
        let Json(sub) = body.map_err(|e| ApiError::unprocessable(e.body_text()))?;
        let answers = parse_labels(&sub)?;
        Ok(s.submit_labels(&ds.standardized, &answers)?.clone())
    })
    .await?;
    Ok(Json(record))
}

async fn patch_params(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<ParamsPatch>, JsonRejection>,
) -> ApiResult<Json<SessionResource>> {
    let resource = mutate(state, id, move |s, ds| {
        if s.pending.is_some() {
            return Err(CoreError::BatchPending.into());
        }
        let Json(patch) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
        s.set_balancing(patch.apply(s.config.balancing))?;
        Ok(SessionResource::of(s, &ds.standardized, &ds.raw)?)
    })
    .await?;
    Ok(Json(resource))
}

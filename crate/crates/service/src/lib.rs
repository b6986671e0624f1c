//! HTTP service for live interactive ranking sessions.
//!
//! Sessions are held in memory. With a log directory, every state change is
//! appended to `<dir>/<session_id>.jsonl` and [`AppState::restore`] rebuilds
//! all sessions after a restart.

pub mod api;
pub mod error;
pub mod events;
pub mod session;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::Mutex;

use interank_core::CandidatePool;

use api::*;
use error::ApiError;
use events::SessionEvent;
use session::{LiveSession, Snapshot};

struct SessionSlot {
    live: Arc<Mutex<LiveSession>>,
    snapshot: RwLock<Arc<Snapshot>>,
}

impl SessionSlot {
    fn new(live: LiveSession) -> Self {
        let snapshot = RwLock::new(Arc::new(live.snapshot()));
        SessionSlot {
            live: Arc::new(Mutex::new(live)),
            snapshot,
        }
    }

    fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn publish(&self, snapshot: Snapshot) {
        *self.snapshot.write().expect("snapshot lock") = Arc::new(snapshot);
    }
}

#[derive(Default)]
struct Inner {
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    pools: RwLock<HashMap<String, Arc<CandidatePool>>>,
    log_dir: Option<PathBuf>,
}

/// Shared service state. Cloning is cheap.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// Sessions kept in memory only.
    pub fn new() -> Self {
        AppState::default()
    }

    /// Sessions mirrored to event logs in `dir`, which must exist.
    pub fn with_log_dir(dir: impl Into<PathBuf>) -> Self {
        AppState {
            inner: Arc::new(Inner {
                log_dir: Some(dir.into()),
                ..Inner::default()
            }),
        }
    }

    /// Rebuilds every session logged in `dir` and keeps logging there.
    pub fn restore(dir: impl Into<PathBuf>) -> Result<Self, ApiError> {
        let state = Self::with_log_dir(dir);
        let dir = state.inner.log_dir.clone().expect("set above");
        for path in events::log_files(&dir)? {
            let live = LiveSession::replay(events::read_log(&path)?, Some(path))?;
            state.insert(live);
        }
        Ok(state)
    }

    /// Makes `pool` available to `POST /v1/sessions` under `pool_id`.
    pub fn register_pool(&self, pool_id: impl Into<String>, pool: CandidatePool) {
        self.inner
            .pools
            .write()
            .expect("pool lock")
            .insert(pool_id.into(), Arc::new(pool));
    }

    pub fn log_dir(&self) -> Option<&Path> {
        self.inner.log_dir.as_deref()
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.inner.sessions.read().expect("session lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn insert(&self, live: LiveSession) -> Arc<SessionSlot> {
        let id = live.id().to_string();
        let slot = Arc::new(SessionSlot::new(live));
        self.inner
            .sessions
            .write()
            .expect("session lock")
            .insert(id, slot.clone());
        slot
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("session lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    fn pool(&self, id: &str) -> Result<Arc<CandidatePool>, ApiError> {
        self.inner
            .pools
            .read()
            .expect("pool lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::validation(format!("unknown pool_id {id:?}")))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/query", get(get_query))
        .route("/v1/sessions/{id}/labels", post(post_label))
        .route("/v1/sessions/{id}/ranking", get(get_ranking))
        .route("/v1/sessions/{id}/events", get(get_events))
        .with_state(state)
}

/// Serves on `listener` until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let value: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    serde_json::from_value(value).map_err(|e| ApiError::Validation {
        message: format!("invalid request: {e}"),
        details: serde_json::Value::Null,
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))?
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<CreateSessionResponse>), ApiError> {
    let req: CreateSessionRequest = parse_body(&body)?;
    let pool = match (req.pool, req.pool_id) {
        (Some(upload), None) => Arc::new(upload.into_pool()?),
        (None, Some(id)) => state.pool(&id)?,
        _ => return Err(ApiError::validation("exactly one of pool and pool_id is required")),
    };
    let id = uuid::Uuid::new_v4().to_string();
    let log_file = state.log_dir().map(|d| events::log_path(d, &id));
    let config = req.config;
    let priors = req.priors;
    let live = blocking(move || LiveSession::create(id, config, pool, priors, log_file)).await?;
    let slot = state.insert(live);
    let snap = slot.snapshot();
    Ok((
        StatusCode::CREATED,
        Json(CreateSessionResponse {
            schema_version: SCHEMA_VERSION,
            session_id: snap.view.session_id.clone(),
            status: snap.view.status,
            ranking: snap.ranking.clone(),
        }),
    ))
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(state.slot(&id)?.snapshot().view.clone()))
}

async fn get_query(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<QueryResponse>, ApiError> {
    let slot = state.slot(&id)?;
    let mut live = slot.live.clone().lock_owned().await;
    // Snapshots are published while the session lock is held, so they never
    // go backwards.
    let resp = blocking(move || {
        let ((a, b), placement) = live.query()?;
        slot.publish(live.snapshot());
        Ok(QueryResponse {
            schema_version: SCHEMA_VERSION,
            a: live.candidate(a),
            b: live.candidate(b),
            placement,
            remaining: live.inner().remaining(),
        })
    })
    .await?;
    Ok(Json(resp))
}

fn parse_label(value: &serde_json::Value) -> Result<bool, ApiError> {
    match value {
        serde_json::Value::Bool(b) => Ok(*b),
        serde_json::Value::Number(n) if n.as_u64() == Some(1) => Ok(true),
        serde_json::Value::Number(n) if n.as_u64() == Some(0) => Ok(false),
        other => Err(ApiError::Validation {
            message: "label must be 0, 1, true or false".into(),
            details: json!({ "label": other }),
        }),
    }
}

async fn post_label(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<LabelResponse>, ApiError> {
    let slot = state.slot(&id)?;
    let req: LabelRequest = parse_body(&body)?;
    let label = parse_label(&req.label)?;
    let mut live = slot.live.clone().lock_owned().await;
    let resp = blocking(move || {
        live.label(req.a_id, req.b_id, label)?;
        let snap = live.snapshot();
        let resp = LabelResponse {
            schema_version: SCHEMA_VERSION,
            status: snap.view.status,
            labels: snap.view.labels,
            remaining: snap.view.remaining,
            ranking: snap.ranking.clone(),
        };
        slot.publish(snap);
        Ok(resp)
    })
    .await?;
    Ok(Json(resp))
}

#[derive(Debug, Deserialize)]
struct RankingParams {
    top_k: Option<usize>,
}

async fn get_ranking(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    params: Result<Query<RankingParams>, axum::extract::rejection::QueryRejection>,
) -> Result<Json<RankingResponse>, ApiError> {
    let slot = state.slot(&id)?;
    let Query(params) = params.map_err(|e| ApiError::validation(e.body_text()))?;
    let snap = slot.snapshot();
    let k = match params.top_k {
        Some(0) => return Err(ApiError::validation("top_k must be ≥ 1")),
        Some(k) => k.min(snap.ranking.len()),
        None => snap.ranking.len(),
    };
    Ok(Json(RankingResponse {
        schema_version: SCHEMA_VERSION,
        session_id: id,
        labels: snap.view.labels,
        ranking: snap.ranking[..k].to_vec(),
    }))
}

#[derive(Debug, Clone, serde::Serialize, Deserialize)]
pub struct EventsResponse {
    pub schema_version: u32,
    pub session_id: String,
    pub events: Vec<SessionEvent>,
}

async fn get_events(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<EventsResponse>, ApiError> {
    let slot = state.slot(&id)?;
    let live = slot.live.lock().await;
    Ok(Json(EventsResponse {
        schema_version: SCHEMA_VERSION,
        session_id: id,
        events: live.events().to_vec(),
    }))
}

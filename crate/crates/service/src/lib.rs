//! HTTP front end for a trained recommender: per-session concert prefixes,
//! masked recommendations with a feature-variety summary, undo and export.
//!
//! The model is loaded once and shared read-only. Every response carries the
//! SHA-256 of the model file in `x-model-version`.

pub mod session;

use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ragam_core::corpus::{Concert, ConcertRecord, RagamMeta, Vocabulary};
use ragam_core::persist::{AnyModel, PersistError};
use ragam_core::ranking::{RecommendError, Recommender};
use ragam_core::recommender::FeatureEncoding;

pub use session::{PlannerSession, SessionStore, DEFAULT_K};

pub const MODEL_VERSION_HEADER: &str = "x-model-version";
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(24 * 3600);

pub struct AppState {
    pub model: AnyModel,
    pub model_version: String,
    pub sessions: SessionStore,
    /// Layout used for the diversity summary.
    encoding: FeatureEncoding,
}

/// Hex SHA-256 of the model file contents.
pub fn model_version_of(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl AppState {
    pub fn new(model: AnyModel, model_version: String, session_ttl: Duration) -> Self {
        let encoding = match &model {
            AnyModel::Ragamai(m) => m.encoding.clone(),
            other => FeatureEncoding::from_vocabulary(other.vocabulary(), false),
        };
        Self {
            model,
            model_version,
            sessions: SessionStore::new(session_ttl),
            encoding,
        }
    }

    pub fn from_model_bytes(bytes: &[u8], session_ttl: Duration) -> Result<Self, PersistError> {
        let model = AnyModel::read(bytes)?;
        Ok(Self::new(model, model_version_of(bytes), session_ttl))
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        self.model.vocabulary()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ApiError {
    UnknownSession(String),
    UnknownRagam(String),
    AlreadyPlayed(String),
    EmptyPrefix,
    BadRequest(String),
    NotFound,
    Internal(String),
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl ApiError {
    fn parts(&self) -> (StatusCode, &'static str, String) {
        match self {
            ApiError::UnknownSession(id) => (
                StatusCode::NOT_FOUND,
                "unknown_session",
                format!("no live session {id:?}"),
            ),
            ApiError::UnknownRagam(name) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "unknown_ragam",
                format!("{name:?} is not in the model vocabulary"),
            ),
            ApiError::AlreadyPlayed(name) => (
                StatusCode::CONFLICT,
                "already_played",
                format!("{name:?} is already in this concert; pass allow_repeat=true to add it again"),
            ),
            ApiError::EmptyPrefix => (
                StatusCode::CONFLICT,
                "empty_prefix",
                "the concert has no songs yet; add a ragam first".to_string(),
            ),
            ApiError::BadRequest(msg) => (StatusCode::BAD_REQUEST, "bad_request", msg.clone()),
            ApiError::NotFound => (StatusCode::NOT_FOUND, "not_found", "no such route".to_string()),
            ApiError::Internal(msg) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", msg.clone()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message) = self.parts();
        (
            status,
            Json(ErrorBody {
                error: code.to_string(),
                message,
            }),
        )
            .into_response()
    }
}

impl From<RecommendError> for ApiError {
    fn from(e: RecommendError) -> Self {
        match e {
            RecommendError::EmptyPrefix => ApiError::EmptyPrefix,
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CreatedSession {
    pub session_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionView {
    pub session_id: String,
    pub prefix: Vec<String>,
    pub created_at: u64,
    pub updated_at: u64,
    pub k_default: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RecommendedItem {
    pub name: String,
    pub score: f64,
    pub meta: RagamMeta,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Recommendations {
    pub items: Vec<RecommendedItem>,
    pub prefix: Vec<String>,
    /// Mean feature encoding of the prefix, one array per block.
    pub diversity: IndexMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Health {
    pub status: String,
    pub model_version: String,
    pub sessions: usize,
}

#[derive(Debug, Deserialize)]
pub struct AddItemBody {
    pub name: String,
}

#[derive(Debug, Deserialize, Default)]
pub struct AddItemQuery {
    #[serde(default)]
    pub allow_repeat: bool,
}

#[derive(Debug, Deserialize, Default)]
pub struct RecommendQuery {
    pub k: Option<usize>,
    pub mask: Option<bool>,
}

fn view(state: &AppState, s: &PlannerSession) -> SessionView {
    let vocab = state.vocabulary();
    SessionView {
        session_id: s.session_id.clone(),
        prefix: s.prefix.iter().map(|&id| vocab.name(id).to_string()).collect(),
        created_at: s.created_at,
        updated_at: s.updated_at,
        k_default: s.k_default,
    }
}

fn session(state: &AppState, id: &str) -> Result<session::SessionHandle, ApiError> {
    state
        .sessions
        .get(id)
        .ok_or_else(|| ApiError::UnknownSession(id.to_string()))
}

async fn create_session(State(state): State<Arc<AppState>>) -> (StatusCode, Json<CreatedSession>) {
    let session_id = state.sessions.create();
    (StatusCode::CREATED, Json(CreatedSession { session_id }))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let handle = session(&state, &id)?;
    let s = handle.lock().unwrap();
    Ok(Json(view(&state, &s)))
}

async fn add_item(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<AddItemQuery>, QueryRejection>,
    body: Result<Json<AddItemBody>, JsonRejection>,
) -> ApiResult<SessionView> {
    let Query(query) = query?;
    let Json(body) = body?;
    let handle = session(&state, &id)?;
    let ragam = state
        .vocabulary()
        .lookup(&body.name)
        .ok_or_else(|| ApiError::UnknownRagam(body.name.clone()))?;
    let mut s = handle.lock().unwrap();
    if !query.allow_repeat && s.prefix.contains(&ragam) {
        return Err(ApiError::AlreadyPlayed(body.name));
    }
    s.prefix.push(ragam);
    s.touch();
    Ok(Json(view(&state, &s)))
}

async fn undo_item(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let handle = session(&state, &id)?;
    let mut s = handle.lock().unwrap();
    if s.prefix.pop().is_none() {
        return Err(ApiError::EmptyPrefix);
    }
    s.touch();
    Ok(Json(view(&state, &s)))
}

/// Ranked items for `prefix` exactly as `Recommender::recommend` returns them.
pub fn recommendations_for(
    state: &AppState,
    prefix: &[ragam_core::corpus::RagamId],
    k: usize,
    mask: bool,
) -> Result<Recommendations, ApiError> {
    let vocab = state.vocabulary();
    let ranked = match state.model.recommend(prefix, k, mask) {
        Ok(r) => r,
        Err(RecommendError::KTooLarge) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let items = ranked
        .into_iter()
        .map(|(id, score)| RecommendedItem {
            name: vocab.name(id).to_string(),
            score,
            meta: vocab.meta(id).clone(),
        })
        .collect();
    let encoded = state.encoding.encode_concert(vocab, prefix);
    let diversity = state
        .encoding
        .split(&encoded)
        .into_iter()
        .map(|(block, values)| (block.name().to_string(), values.to_vec()))
        .collect();
    Ok(Recommendations {
        items,
        prefix: prefix.iter().map(|&id| vocab.name(id).to_string()).collect(),
        diversity,
    })
}

async fn get_recommendations(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<RecommendQuery>, QueryRejection>,
) -> ApiResult<Recommendations> {
    let Query(query) = query?;
    let handle = session(&state, &id)?;
    let (prefix, k_default) = {
        let s = handle.lock().unwrap();
        (s.prefix.clone(), s.k_default)
    };
    let k = query.k.unwrap_or(k_default);
    if k == 0 {
        return Err(ApiError::BadRequest("k must be at least 1".into()));
    }
    if prefix.is_empty() {
        return Err(ApiError::EmptyPrefix);
    }
    Ok(Json(recommendations_for(&state, &prefix, k, query.mask.unwrap_or(true))?))
}

async fn export_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let handle = session(&state, &id)?;
    let s = handle.lock().unwrap();
    if s.prefix.is_empty() {
        return Err(ApiError::EmptyPrefix);
    }
    let concert = Concert {
        concert_id: format!("planned-{}", s.session_id),
        date: None,
        items: s.prefix.clone(),
    };
    let line = ConcertRecord::from_concert(&concert, state.vocabulary()).to_json_line() + "\n";
    Ok(([(axum::http::header::CONTENT_TYPE, "application/x-ndjson")], line).into_response())
}

async fn list_ragams(State(state): State<Arc<AppState>>) -> Json<Vec<RagamMeta>> {
    Json(state.vocabulary().metas().to_vec())
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model_version: state.model_version.clone(),
        sessions: state.sessions.len(),
    })
}

async fn fallback() -> ApiError {
    ApiError::NotFound
}

async fn stamp_version(State(state): State<Arc<AppState>>, mut response: Response) -> Response {
    if let Ok(v) = HeaderValue::from_str(&state.model_version) {
        response.headers_mut().insert(MODEL_VERSION_HEADER, v);
    }
    response
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/items", post(add_item))
        .route("/sessions/{id}/undo", post(undo_item))
        .route("/sessions/{id}/recommendations", get(get_recommendations))
        .route("/sessions/{id}/export", get(export_session))
        .route("/ragams", get(list_ragams))
        .route("/healthz", get(healthz))
        .fallback(fallback)
        .layer(axum::middleware::map_response_with_state(state.clone(), stamp_version))
        .with_state(state)
}

/// Serves until the listener fails. Expired sessions are also swept
/// periodically so idle ones do not accumulate.
pub async fn serve(state: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    let sweeper = state.clone();
    let period = (state.sessions.ttl() / 4).clamp(Duration::from_secs(1), Duration::from_secs(600));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let removed = sweeper.sessions.sweep();
            if removed > 0 {
                log::info!("expired {removed} idle sessions");
            }
        }
    });
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

//! `/v1` JSON API.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use nyaya_core::evals::{EvalRecord, EvalReport};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::{Engine, EngineError, Health, QueryResult};
use crate::evalrun::{self, EvalRunError};
use crate::gateway::GatewayError;
use crate::session::{SessionError, Turn};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": {"code": self.code, "message": self.message}}))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, "session_not_found", e.to_string()),
            SessionError::OrdinalGap { .. } => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
            SessionError::Storage(_) | SessionError::Corrupt { .. } => {
                Self::new(StatusCode::SERVICE_UNAVAILABLE, "storage_unavailable", e.to_string())
            }
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::EmptyQuery => Self::new(StatusCode::BAD_REQUEST, "empty_query", e.to_string()),
            EngineError::Session(s) => s.into(),
            EngineError::Gateway { source: GatewayError::Timeout(_), .. } => {
                Self::new(StatusCode::GATEWAY_TIMEOUT, "gateway_timeout", e.to_string())
            }
            EngineError::Gateway { .. } => Self::new(StatusCode::BAD_GATEWAY, "gateway_error", e.to_string()),
            EngineError::Embed(_) => Self::new(StatusCode::BAD_GATEWAY, "embedder_error", e.to_string()),
            EngineError::Ingest(_) => Self::new(StatusCode::BAD_REQUEST, "invalid_document", e.to_string()),
            EngineError::Storage(_) => Self::new(StatusCode::SERVICE_UNAVAILABLE, "storage_unavailable", e.to_string()),
            EngineError::Chunk(_) | EngineError::Index(_) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "index_error", e.to_string())
            }
        }
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.body_text()))
}

type AppState = Arc<Engine>;

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/query", post(query))
        .route("/v1/sessions/{id}/history", get(history))
        .route("/v1/corpus/documents", post(ingest))
        .route("/v1/corpus/reindex", post(reindex))
        .route("/v1/eval/run", post(eval_run))
        .with_state(engine)
}

#[derive(Serialize)]
struct HealthBody {
    status: &'static str,
    #[serde(flatten)]
    health: Health,
}

async fn health(State(engine): State<AppState>) -> Json<HealthBody> {
    Json(HealthBody { status: "ok", health: engine.health() })
}

#[derive(Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

async fn create_session(State(engine): State<AppState>) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let (session_id, _) = engine.sessions().create()?;
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id })))
}

#[derive(Deserialize)]
pub struct QueryBody {
    pub text: String,
}

async fn query(
    State(engine): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<QueryBody>, JsonRejection>,
) -> Result<Json<QueryResult>, ApiError> {
    let q = body(payload)?;
    Ok(Json(engine.query(&id, &q.text).await?.result))
}

#[derive(Deserialize)]
struct HistoryParams {
    last_n: Option<usize>,
}

#[derive(Serialize, Deserialize)]
pub struct HistoryBody {
    pub session_id: String,
    pub created_at: DateTime<Utc>,
    pub turns: Vec<Turn>,
}

async fn history(
    State(engine): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<HistoryParams>,
) -> Result<Json<HistoryBody>, ApiError> {
    let handle = engine.sessions().get(&id)?;
    let log = handle.lock().await;
    let turns = match params.last_n {
        Some(n) => log.history(n),
        None => log.turns(),
    };
    Ok(Json(HistoryBody { session_id: id, created_at: log.created_at(), turns: turns.to_vec() }))
}

#[derive(Deserialize)]
pub struct IngestBody {
    /// Corpus records, same fields as a line of the corpus file.
    pub documents: Vec<serde_json::Value>,
    #[serde(default)]
    pub strict: bool,
}

#[derive(Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Serialize, Deserialize)]
pub struct IngestResponse {
    pub count: usize,
    pub errors: Vec<LineError>,
    pub staged_docs: usize,
}

async fn ingest(
    State(engine): State<AppState>,
    payload: Result<Json<IngestBody>, JsonRejection>,
) -> Result<Json<IngestResponse>, ApiError> {
    let b = body(payload)?;
    let lines: Vec<String> = b.documents.iter().map(|d| d.to_string()).collect();
    let report = engine.ingest(lines.iter().map(String::as_str), b.strict)?;
    Ok(Json(IngestResponse {
        count: report.count,
        errors: report.errors.iter().map(|e| LineError { line: e.line(), message: e.to_string() }).collect(),
        staged_docs: engine.health().staged_docs,
    }))
}

async fn reindex(State(engine): State<AppState>) -> Result<Json<Health>, ApiError> {
    Ok(Json(engine.reindex().await?))
}

#[derive(Deserialize)]
pub struct EvalBody {
    pub records: Vec<EvalRecord>,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    5
}

#[derive(Serialize)]
struct EvalResponse {
    report: EvalReport,
    text: String,
}

async fn eval_run(
    State(engine): State<AppState>,
    payload: Result<Json<EvalBody>, JsonRejection>,
) -> Result<Json<EvalResponse>, ApiError> {
    let b = body(payload)?;
    if let Some((i, reason)) = b.records.iter().enumerate().find_map(|(i, r)| r.validate().err().map(|e| (i, e))) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_record", format!("record {i}: {reason}")));
    }
    let report = evalrun::run(&engine, &b.records, b.k).await.map_err(|e| match e {
        EvalRunError::Engine(e) => ApiError::from(e),
        EvalRunError::Metrics(m) => ApiError::new(StatusCode::BAD_REQUEST, "invalid_eval", m.to_string()),
    })?;
    let text = report.render_text();
    Ok(Json(EvalResponse { report, text }))
}

//! HTTP API.
//!
//! | method | path                  | body / result                          |
//! |--------|-----------------------|----------------------------------------|
//! | GET    | `/health`             | status and database statistics        |
//! | POST   | `/recommend`          | `{query, k?}` → recommendation payload |
//! | GET    | `/evidence/:span_id`  | the evidence record                    |
//! | GET    | `/config`             | effective configuration                |
//!
//! The pipeline runs on the blocking pool; at most `max_in_flight` runs are
//! active at once and further requests wait for a slot.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evidencite::{AppConfig, PipelineError, Recommender};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::Semaphore;

#[derive(Clone)]
pub struct AppState {
    recommender: Arc<Recommender>,
    config: Arc<AppConfig>,
    slots: Arc<Semaphore>,
}

impl AppState {
    pub fn new(recommender: Recommender, config: AppConfig) -> Self {
        let slots = Arc::new(Semaphore::new(config.max_in_flight));
        AppState { recommender: Arc::new(recommender), config: Arc::new(config), slots }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecommendRequest {
    query: String,
    #[serde(default)]
    k: Option<usize>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/recommend", post(recommend))
        .route("/evidence/:span_id", get(evidence))
        .route("/config", get(config))
        .with_state(state)
}

fn error(status: StatusCode, message: impl std::fmt::Display) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

async fn health(State(s): State<AppState>) -> Json<serde_json::Value> {
    let db = s.recommender.db();
    Json(json!({
        "status": "ok",
        "doc_count": db.stats().doc_count,
        "papers": db.papers().len(),
        "cited_papers": db.cited_papers().len(),
        "avg_span_tokens": db.stats().avg_span_tokens,
        "strategy": s.config.pipeline.rerank.strategy.name(),
    }))
}

async fn recommend(State(s): State<AppState>, body: Bytes) -> Response {
    let req: RecommendRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    let k = req.k.unwrap_or(s.config.default_k);
    let Ok(_permit) = s.slots.clone().acquire_owned().await else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "shutting down");
    };
    let rec = s.recommender.clone();
    let result = tokio::task::spawn_blocking(move || rec.recommend(&req.query, k)).await;
    match result {
        Ok(Ok(payload)) => {
            let mut body = payload.to_json();
            body.push('\n');
            ([(header::CONTENT_TYPE, "application/json")], body).into_response()
        }
        Ok(Err(PipelineError::Embedding(e))) => error(StatusCode::SERVICE_UNAVAILABLE, format!("embedding provider: {e}")),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn evidence(State(s): State<AppState>, Path(span_id): Path<usize>) -> Response {
    match s.recommender.db().record(span_id) {
        Some(r) => Json(r.clone()).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no evidence span {span_id}")),
    }
}

async fn config(State(s): State<AppState>) -> Json<AppConfig> {
    Json((*s.config).clone())
}

/// Binds `addr` and serves until the process exits.
pub fn serve_blocking(addr: &str, recommender: Recommender, config: AppConfig) -> anyhow::Result<()> {
    let state = AppState::new(recommender, config);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on {}", listener.local_addr()?);
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(state)).await?;
        Ok(())
    })
}

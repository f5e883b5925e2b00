//! HTTP inference service. Rules arrive inline with every request so
//! callers can try edited rule sets. Forward passes run on the blocking
//! pool behind a semaphore; requests beyond the wait queue are turned away.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use modq_core::{ModelKind, Prediction, Rule, RuleSet};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::config::ServeConfig;
use crate::models::ServedModel;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleInput {
    pub n: u32,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub comment: String,
    pub community: String,
    pub rules: Vec<RuleInput>,
    pub model_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub comment: String,
    pub community: String,
    pub rules_before: Vec<RuleInput>,
    pub rules_after: Vec<RuleInput>,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub before: Prediction,
    pub after: Prediction,
    /// The predicted rules' texts differ.
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub id: String,
    pub kind: ModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, field: Option<String>) -> Self {
        ApiError { status, body: ErrorBody { code: code.into(), message: message.into(), field } }
    }

    fn invalid(field: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_error", message, Some(field.to_string()))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

pub struct AppState {
    models: BTreeMap<String, ServedModel>,
    permits: Arc<Semaphore>,
    waiting: AtomicUsize,
    queue_depth: usize,
}

impl AppState {
    pub fn new(models: BTreeMap<String, ServedModel>, cfg: &ServeConfig) -> Self {
        AppState {
            models,
            permits: Arc::new(Semaphore::new(cfg.max_concurrent.max(1))),
            waiting: AtomicUsize::new(0),
            queue_depth: cfg.queue_depth,
        }
    }
}

/// Decodes JSON, reporting the path of the offending field.
pub fn decode<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", inner.to_string(), None)
        } else {
            let field = (path != ".").then_some(path);
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_error", inner.to_string(), field)
        }
    })
}

pub fn rule_set(community: &str, rules: &[RuleInput], field: &str) -> Result<RuleSet, ApiError> {
    if rules.is_empty() {
        return Err(ApiError::invalid(field, "at least one rule is required"));
    }
    let mut seen = std::collections::HashSet::new();
    for (i, r) in rules.iter().enumerate() {
        if r.n == 0 {
            return Err(ApiError::invalid(&format!("{field}[{i}].n"), "rule numbers start at 1; 0 is the safe option"));
        }
        if !seen.insert(r.n) {
            return Err(ApiError::invalid(&format!("{field}[{i}].n"), format!("rule number {} repeats", r.n)));
        }
        if r.text.trim().is_empty() {
            return Err(ApiError::invalid(&format!("{field}[{i}].text"), "rule text is empty"));
        }
    }
    let rs = RuleSet::with_rules(community, rules.iter().map(|r| Rule::new(r.n, r.text.clone())).collect());
    rs.validate().map_err(|e| ApiError::invalid(field, e.to_string()))?;
    Ok(rs)
}

fn model<'a>(state: &'a AppState, id: &str) -> Result<&'a ServedModel, ApiError> {
    state.models.get(id).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_model",
            format!("no model `{id}` is loaded"),
            Some("model_id".into()),
        )
    })
}

/// Runs `f` on the blocking pool once a forward-pass slot is free.
async fn run<T: Send + 'static>(
    state: &AppState,
    f: impl FnOnce() -> modq_core::Result<T> + Send + 'static,
) -> Result<T, ApiError> {
    if state.waiting.fetch_add(1, Ordering::SeqCst) >= state.queue_depth + state.permits.available_permits() {
        state.waiting.fetch_sub(1, Ordering::SeqCst);
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "busy", "too many requests queued", None));
    }
    let permit = state.permits.clone().acquire_owned().await;
    state.waiting.fetch_sub(1, Ordering::SeqCst);
    let permit = permit
        .map_err(|_| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "shutting_down", "service is stopping", None))?;
    let out = tokio::task::spawn_blocking(move || {
        let _permit = permit;
        f()
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string(), None))?;
    out.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "prediction_failed", e.to_string(), None))
}

fn check_comment(comment: &str) -> Result<(), ApiError> {
    if comment.trim().is_empty() {
        return Err(ApiError::invalid("comment", "comment is empty"));
    }
    Ok(())
}

async fn predict(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<Prediction>, ApiError> {
    let req: PredictRequest = decode(&body)?;
    check_comment(&req.comment)?;
    let rules = rule_set(&req.community, &req.rules, "rules")?;
    let predictor = model(&state, &req.model_id)?.predictor.clone();
    let p = run(&state, move || predictor.predict(&req.comment, &req.community, &rules)).await?;
    Ok(Json(p))
}

async fn whatif(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<WhatIfResponse>, ApiError> {
    let req: WhatIfRequest = decode(&body)?;
    check_comment(&req.comment)?;
    let before_rules = rule_set(&req.community, &req.rules_before, "rules_before")?;
    let after_rules = rule_set(&req.community, &req.rules_after, "rules_after")?;
    let predictor = model(&state, &req.model_id)?.predictor.clone();
    let (before, after) = run(&state, move || {
        let before = predictor.predict(&req.comment, &req.community, &before_rules)?;
        let after = predictor.predict(&req.comment, &req.community, &after_rules)?;
        Ok((before, after))
    })
    .await?;
    let changed = before.rule_text != after.rule_text;
    Ok(Json(WhatIfResponse { before, after, changed }))
}

async fn models(State(state): State<Arc<AppState>>) -> Json<Vec<ModelInfo>> {
    Json(state.models.iter().map(|(id, m)| ModelInfo { id: id.clone(), kind: m.kind }).collect())
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok", "models": state.models.len()}))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint", None)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/predict", post(predict))
        .route("/v1/whatif", post(whatif))
        .route("/v1/models", get(models))
        .route("/health", get(health))
        .fallback(not_found)
        .with_state(state)
}

/// Binds `addr` and serves in the background; returns the bound address.
pub async fn spawn(state: Arc<AppState>, addr: &str) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let bound = listener.local_addr()?;
    let app = router(state);
    let task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            log::error!("service stopped: {e}");
        }
    });
    Ok((bound, task))
}

/// Serves until interrupted.
pub async fn serve_forever(state: Arc<AppState>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

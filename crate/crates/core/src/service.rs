//! JSON-over-HTTP front end to a trained store.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;
use serde_json::json;

use crate::config::AppConfig;
use crate::game::transition_table;
use crate::pipeline::{AppError, SolveRequest, TrainedModels};
use crate::store::{canonical_json, sha256_hex};

pub struct AppState {
    pub config: AppConfig,
    pub models: TrainedModels,
    /// Serialized /api/solve responses by request hash.
    cache: Mutex<HashMap<String, Bytes>>,
}

impl AppState {
    pub fn new(config: AppConfig, models: TrainedModels) -> Self {
        AppState {
            config,
            models,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn cached_responses(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = match self {
            AppError::Validation(_) => StatusCode::BAD_REQUEST,
            AppError::NotFound(_) => StatusCode::NOT_FOUND,
            AppError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = json!({"error": self.code(), "message": self.to_string()});
        (status, json_bytes(&body)).into_response()
    }
}

fn json_bytes<T: Serialize>(v: &T) -> Response {
    match serde_json::to_vec(v) {
        Ok(b) => ([(header::CONTENT_TYPE, "application/json")], b).into_response(),
        Err(e) => AppError::Internal(e.to_string()).into_response(),
    }
}

fn raw_json(b: Bytes) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], b).into_response()
}

fn parse_request(body: &[u8]) -> Result<SolveRequest, AppError> {
    serde_json::from_slice(body).map_err(|e| AppError::Validation(format!("invalid request body: {e}")))
}

/// Cache key: the request in canonical form plus the data it was solved on,
/// so a retrained store never serves stale answers.
fn request_hash(req: &SolveRequest, fingerprint: &str) -> Result<String, AppError> {
    let mut bytes = canonical_json(req).map_err(|e| AppError::Internal(e.to_string()))?;
    bytes.extend_from_slice(fingerprint.as_bytes());
    Ok(sha256_hex(&bytes))
}

async fn health(State(s): State<Arc<AppState>>) -> Response {
    json_bytes(&json!({
        "status": "ok",
        "data_fingerprint": s.models.store.data_fingerprint(),
    }))
}

async fn players(State(s): State<Arc<AppState>>) -> Response {
    let p = &s.models.players;
    json_bytes(&json!({
        "data_fingerprint": s.models.store.data_fingerprint(),
        "pitchers": p.pitchers,
        "batters": p.batters,
        "skipped": p.skipped,
    }))
}

async fn transitions() -> Response {
    json_bytes(&transition_table())
}

async fn run_solve(s: Arc<AppState>, req: SolveRequest) -> Result<crate::pipeline::SolveResponse, AppError> {
    tokio::task::spawn_blocking(move || s.models.solve(&s.config, &req))
        .await
        .map_err(|e| AppError::Internal(format!("solve task failed: {e}")))?
}

async fn solve(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Response, AppError> {
    let req = parse_request(&body)?;
    let key = request_hash(&req, s.models.store.data_fingerprint())?;
    if let Some(hit) = s.cache.lock().expect("cache lock").get(&key).cloned() {
        return Ok(raw_json(hit));
    }
    let persist = req.overrides.is_empty();
    let resp = run_solve(s.clone(), req).await?;
    if persist {
        let (s2, r2) = (s.clone(), resp.clone());
        tokio::task::spawn_blocking(move || s2.models.persist(&r2))
            .await
            .map_err(|e| AppError::Internal(e.to_string()))??;
    }
    let bytes = Bytes::from(serde_json::to_vec(&resp).map_err(|e| AppError::Internal(e.to_string()))?);
    let mut cache = s.cache.lock().expect("cache lock");
    // a racing identical request may have landed first; serve what is cached
    let stored = cache.entry(key).or_insert(bytes).clone();
    Ok(raw_json(stored))
}

async fn whatif(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Response, AppError> {
    let req = parse_request(&body)?;
    let resp = run_solve(s, req).await?;
    Ok(json_bytes(&resp))
}

async fn solution(
    State(s): State<Arc<AppState>>,
    Path((pitcher, batter)): Path<(String, String)>,
) -> Result<Response, AppError> {
    let doc = tokio::task::spawn_blocking(move || s.models.stored_solution(&pitcher, &batter))
        .await
        .map_err(|e| AppError::Internal(e.to_string()))??;
    Ok(json_bytes(&doc))
}

async fn fallback() -> AppError {
    AppError::NotFound("no such endpoint".into())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/players", get(players))
        .route("/api/transitions", get(transitions))
        .route("/api/solve", post(solve))
        .route("/api/whatif", post(whatif))
        .route("/api/solution/{pitcher}/{batter}", get(solution))
        .fallback(fallback)
        .with_state(state)
}

/// Bind and serve until the process is stopped.
pub async fn serve(config: AppConfig) -> Result<(), AppError> {
    let models = TrainedModels::load(&config.store)?;
    let addr = format!("{}:{}", config.http.bind, config.http.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| AppError::Internal(format!("cannot bind {addr}: {e}")))?;
    eprintln!("listening on {addr}");
    let app = router(Arc::new(AppState::new(config, models)));
    axum::serve(listener, app)
        .await
        .map_err(|e| AppError::Internal(e.to_string()))
}

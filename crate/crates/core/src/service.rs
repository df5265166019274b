//! Read-only JSON service over an immutable store snapshot.
//!
//! | route | query |
//! |---|---|
//! | `GET /stations` | |
//! | `GET /stations/{id}/forecast` | `date=YYYY-MM-DD` |
//! | `GET /stations/{id}/wait` | `at=YYYY-MM-DDTHH:MM:SS` |
//! | `GET /stations/{id}/load` | `at=...` |
//! | `GET /routes/{a}/{b}` | optional `window=START/END` |
//!
//! Malformed requests get 400, unknown stations and empty results 404, both
//! with a `{"error": ...}` body.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::rejection::{PathRejection, QueryRejection};
use axum::extract::{Path, Query as QueryParams, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::json;
use tokio::net::TcpListener;

use crate::analytics::AnalysisSettings;
use crate::ingest::HistoryStore;
use crate::query::{self, Query, QueryError};

#[derive(Debug, Clone)]
struct AppState {
    store: Arc<HistoryStore>,
    settings: AnalysisSettings,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::BadRequest(m) => ApiError(StatusCode::BAD_REQUEST, m),
            QueryError::NotFound(m) => ApiError(StatusCode::NOT_FOUND, m),
        }
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, e.body_text())
    }
}

type Params = Result<QueryParams<HashMap<String, String>>, QueryRejection>;

fn required<'p>(params: &'p HashMap<String, String>, name: &str) -> Result<&'p str, ApiError> {
    params
        .get(name)
        .map(String::as_str)
        .ok_or_else(|| ApiError(StatusCode::BAD_REQUEST, format!("missing query parameter `{name}`")))
}

fn run(state: &AppState, query: Query) -> Result<Json<serde_json::Value>, ApiError> {
    Ok(Json(query::execute(&state.store, &state.settings, &query)?))
}

async fn stations(State(state): State<AppState>) -> Result<Json<serde_json::Value>, ApiError> {
    run(&state, Query::Stations)
}

async fn forecast(
    State(state): State<AppState>,
    id: Result<Path<String>, PathRejection>,
    params: Params,
) -> Result<Json<serde_json::Value>, ApiError> {
    let (Path(id), QueryParams(params)) = (id?, params?);
    let station = query::parse_station(&id)?;
    let date = query::parse_day(required(&params, "date")?)?;
    run(&state, Query::Forecast { station, date })
}

async fn wait(
    State(state): State<AppState>,
    id: Result<Path<String>, PathRejection>,
    params: Params,
) -> Result<Json<serde_json::Value>, ApiError> {
    let (Path(id), QueryParams(params)) = (id?, params?);
    let station = query::parse_station(&id)?;
    let at = query::parse_at(required(&params, "at")?)?;
    run(&state, Query::Wait { station, at })
}

async fn load(
    State(state): State<AppState>,
    id: Result<Path<String>, PathRejection>,
    params: Params,
) -> Result<Json<serde_json::Value>, ApiError> {
    let (Path(id), QueryParams(params)) = (id?, params?);
    let station = query::parse_station(&id)?;
    let at = query::parse_at(required(&params, "at")?)?;
    run(&state, Query::Load { station, at })
}

async fn route(
    State(state): State<AppState>,
    ids: Result<Path<(String, String)>, PathRejection>,
    params: Params,
) -> Result<Json<serde_json::Value>, ApiError> {
    let (Path((a, b)), QueryParams(params)) = (ids?, params?);
    let from = query::parse_station(&a)?;
    let to = query::parse_station(&b)?;
    let window = query::parse_window(params.get("window").map(String::as_str))?;
    run(&state, Query::Route { from, to, window })
}

async fn not_found() -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "no such endpoint".to_string())
}

pub fn router(store: Arc<HistoryStore>, settings: AnalysisSettings) -> Router {
    Router::new()
        .route("/stations", get(stations))
        .route("/stations/{id}/forecast", get(forecast))
        .route("/stations/{id}/wait", get(wait))
        .route("/stations/{id}/load", get(load))
        .route("/routes/{a}/{b}", get(route))
        .fallback(not_found)
        .with_state(AppState { store, settings })
}

/// Serves until the future `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

//! HTTP front end over a register store.
//!
//! Reads are unrestricted. Overrides go through the store, which serializes
//! writers with its commit lock. Scenario evaluation never touches disk.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use qer_core::exposure::{diff_scenarios, run_scenario, ScenarioDiff, ScenarioResult, ThreatScenario};
use qer_core::report::{portfolio_stats, PortfolioStats, DEFAULT_LONG_LIVED_YEARS};
use qer_core::store::RegisterStore;
use qer_core::Error;
use serde::{Deserialize, Serialize};

/// Error body returned by every failing endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    NotFound,
    Conflict,
    BadInput,
    Locked,
}

impl ApiError {
    fn new(status: StatusCode, code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code,
            message: message.into(),
        }
    }

    fn bad_input(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, ErrorCode::BadInput, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, ErrorCode::NotFound),
            Error::Conflict { .. } => (StatusCode::CONFLICT, ErrorCode::Conflict),
            Error::Locked => (StatusCode::LOCKED, ErrorCode::Locked),
            // The store could not be read or written; report it as unavailable.
            Error::Io { .. } => (StatusCode::SERVICE_UNAVAILABLE, ErrorCode::Locked),
            Error::Input(_) | Error::Config(_) | Error::Format { .. } | Error::CertificateParse { .. } => {
                (StatusCode::BAD_REQUEST, ErrorCode::BadInput)
            }
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_input(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionListing {
    pub version_id: u64,
    pub created_at: DateTime<Utc>,
    pub t_threat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRequest {
    pub t_threat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResponse {
    /// Version whose assets were evaluated.
    pub version_id: u64,
    pub committed: ScenarioResult,
    pub requested: ScenarioResult,
    pub diff: ScenarioDiff,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverrideRequest {
    pub to_wave: u8,
    pub actor: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverrideResponse {
    pub version_id: u64,
}

#[derive(Debug, Deserialize)]
struct StatsQuery {
    long_lived_years: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Register(#[from] Error),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Server(#[source] std::io::Error),
}

type Shared = Arc<RegisterStore>;

pub fn router(store: RegisterStore) -> Router {
    Router::new()
        .route("/versions", get(list_versions))
        .route("/versions/{id}/entries", get(entries))
        .route("/versions/{id}/stats", get(stats))
        .route("/versions/{id}/entries/{qer_id}/override", post(override_entry))
        .route("/scenario", post(scenario))
        .with_state(Arc::new(store))
}

/// Serves the register at `register_dir` until interrupted.
pub async fn serve(register_dir: &Path, addr: SocketAddr) -> Result<(), ServeError> {
    let store = RegisterStore::open_existing(register_dir)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    tracing::info!(%addr, register = %register_dir.display(), "serving register");
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServeError::Server)
}

/// Runs blocking store work off the async executor.
async fn blocking<T, F>(store: &Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&RegisterStore) -> qer_core::Result<T> + Send + 'static,
{
    let store = store.clone();
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, ErrorCode::Locked, e.to_string()))?
        .map_err(ApiError::from)
}

fn version_id(raw: &str) -> Result<u64, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::bad_input(format!("version id {raw:?} is not a number")))
}

async fn list_versions(State(store): State<Shared>) -> ApiResult<Vec<VersionListing>> {
    let versions = blocking(&store, |s| s.versions()).await?;
    Ok(Json(
        versions
            .into_iter()
            .map(|v| VersionListing {
                version_id: v.version_id,
                created_at: v.created_at,
                t_threat: v.t_threat,
            })
            .collect(),
    ))
}

async fn entries(
    State(store): State<Shared>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Vec<qer_core::exposure::QerEntry>> {
    let id = version_id(&id)?;
    Ok(Json(blocking(&store, move |s| s.load(id)).await?.entries))
}

async fn stats(
    State(store): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<StatsQuery>,
) -> ApiResult<PortfolioStats> {
    let id = version_id(&id)?;
    let threshold = q.long_lived_years.unwrap_or(DEFAULT_LONG_LIVED_YEARS);
    if !threshold.is_finite() || threshold < 0.0 {
        return Err(ApiError::bad_input("long_lived_years must be a non-negative number"));
    }
    let version = blocking(&store, move |s| s.load(id)).await?;
    Ok(Json(portfolio_stats(&version, threshold)))
}

async fn scenario(
    State(store): State<Shared>,
    body: Result<Json<ScenarioRequest>, JsonRejection>,
) -> ApiResult<ScenarioResponse> {
    let Json(req) = body?;
    let requested = ThreatScenario::years(req.t_threat)?;
    let latest = blocking(&store, |s| s.latest())
        .await?
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, ErrorCode::NotFound, "register has no versions"))?;
    let assets: Vec<_> = latest.entries.iter().map(|e| e.enriched.clone()).collect();
    let committed = run_scenario(&assets, &latest.scenario)?;
    let requested = run_scenario(&assets, &requested)?;
    let diff = diff_scenarios(&committed, &requested)?;
    Ok(Json(ScenarioResponse {
        version_id: latest.version_id,
        committed,
        requested,
        diff,
    }))
}

async fn override_entry(
    State(store): State<Shared>,
    UrlPath((id, qer_id)): UrlPath<(String, String)>,
    body: Result<Json<OverrideRequest>, JsonRejection>,
) -> ApiResult<OverrideResponse> {
    let id = version_id(&id)?;
    let Json(req) = body?;
    let version = blocking(&store, move |s| {
        s.override_entry(id, &qer_id, req.to_wave, &req.actor, &req.rationale, Utc::now())
    })
    .await?;
    tracing::info!(version_id = version.version_id, "override committed");
    Ok(Json(OverrideResponse {
        version_id: version.version_id,
    }))
}

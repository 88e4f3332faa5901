//! HTTP/JSON front end for an annotation campaign.
//!
//! ```text
//! GET  /api/items/next?annotator=ID     X-Annotator-Token header
//! POST /api/verdicts  {annotator, item_id, choice}
//! GET  /api/progress
//! GET  /api/report?partial=bool
//! ```
//!
//! Everything else is served from the UI directory when one is given.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;
use udrefine_core::adjudication::AbChoice;
use udrefine_core::campaign::{Campaign, CampaignError};

pub const TOKEN_HEADER: &str = "x-annotator-token";

/// Shared campaign. All mutations go through the one mutex, so verdict
/// writes are serialized.
#[derive(Clone)]
pub struct AppState {
    campaign: Arc<Mutex<Campaign>>,
}

impl AppState {
    pub fn new(campaign: Campaign) -> Self {
        Self {
            campaign: Arc::new(Mutex::new(campaign)),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Campaign> {
        self.campaign.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

pub struct ApiError(StatusCode, String);

impl From<CampaignError> for ApiError {
    fn from(e: CampaignError) -> Self {
        let status = match &e {
            CampaignError::UnknownAnnotator(_) | CampaignError::UnknownItem(_) => StatusCode::NOT_FOUND,
            CampaignError::Unauthorized(_) => StatusCode::UNAUTHORIZED,
            CampaignError::NotServed { .. } | CampaignError::Incomplete { .. } => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %e, "request failed");
        }
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn token(headers: &HeaderMap) -> Result<&str, ApiError> {
    headers
        .get(TOKEN_HEADER)
        .and_then(|v| v.to_str().ok())
        .ok_or_else(|| ApiError(StatusCode::UNAUTHORIZED, format!("missing {TOKEN_HEADER} header")))
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    annotator: String,
}

async fn next_item(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<NextQuery>,
) -> Result<Response, ApiError> {
    let campaign = state.lock();
    campaign.authenticate(&q.annotator, token(&headers)?)?;
    Ok(Json(campaign.next_item(&q.annotator)?).into_response())
}

#[derive(Debug, Deserialize)]
struct VerdictBody {
    annotator: String,
    item_id: String,
    choice: AbChoice,
}

async fn submit(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<VerdictBody>,
) -> Result<Response, ApiError> {
    let token = token(&headers)?.to_string();
    let ack = tokio::task::spawn_blocking(move || {
        let mut campaign = state.lock();
        campaign.authenticate(&body.annotator, &token)?;
        campaign.submit(&body.annotator, &body.item_id, body.choice)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(ack).into_response())
}

async fn progress(State(state): State<AppState>) -> ApiResult<udrefine_core::campaign::Progress> {
    Ok(Json(state.lock().progress()))
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    #[serde(default)]
    partial: bool,
}

async fn report(
    State(state): State<AppState>,
    Query(q): Query<ReportQuery>,
) -> ApiResult<udrefine_core::adjudication::AdjudicationReport> {
    Ok(Json(state.lock().report(q.partial)?))
}

pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/items/next", get(next_item))
        .route("/api/verdicts", post(submit))
        .route("/api/progress", get(progress))
        .route("/api/report", get(report))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serve until Ctrl-C.
pub async fn serve(addr: SocketAddr, campaign: Campaign, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "annotation service listening");
    axum::serve(listener, router(AppState::new(campaign), ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

//! REST routes over a shared [`Platform`].

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tokio::net::TcpListener;

use crate::error::{Result, ServiceError};
use crate::platform::Platform;
use crate::teams::Teams;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Ground-truth JSON file or annotation directory. Without one, submissions get 503.
    pub ground_truth: Option<PathBuf>,
    pub teams: PathBuf,
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
}

impl ServiceConfig {
    pub fn build_platform(&self) -> Result<Platform> {
        let teams = Teams::load(&self.teams)?;
        let gt =
            match &self.ground_truth {
                Some(p) => Some(paveval_core::dataset::load_annotations(p).map_err(|e| {
                    ServiceError::Config(format!("ground truth {}: {e}", p.display()))
                })?),
                None => {
                    tracing::warn!("no ground truth configured; submissions will be refused");
                    None
                }
            };
        Platform::open(teams, gt, &self.data_dir)
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::BadSubmission(_) => StatusCode::BAD_REQUEST,
            ServiceError::UnknownImages(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::GroundTruthUnavailable => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::UnknownTeam(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": self.to_string() });
        match &self {
            ServiceError::BadSubmission(paveval_core::Error::Schema { path, .. }) => {
                body["path"] = json!(path);
            }
            ServiceError::BadSubmission(paveval_core::Error::Parse { line: Some(l), .. }) => {
                body["line"] = json!(l);
            }
            ServiceError::UnknownImages(ids) => body["image_ids"] = json!(ids),
            _ => {}
        }
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (status, Json(body)).into_response()
    }
}

/// Accepts `Authorization: Bearer <token>` or the bare token.
fn token(headers: &HeaderMap) -> Option<&str> {
    let raw = headers.get(header::AUTHORIZATION)?.to_str().ok()?.trim();
    let t = match raw.split_once(' ') {
        Some((scheme, rest)) if scheme.eq_ignore_ascii_case("bearer") => rest.trim(),
        _ if raw.eq_ignore_ascii_case("bearer") => "",
        _ => raw,
    };
    (!t.is_empty()).then_some(t)
}

async fn submit(
    State(p): State<Arc<Platform>>,
    headers: HeaderMap,
    body: Bytes,
) -> std::result::Result<Response, ServiceError> {
    let token = token(&headers)
        .ok_or(ServiceError::Unauthorized)?
        .to_string();
    let response = tokio::task::spawn_blocking(move || p.submit(&token, &body))
        .await
        .map_err(|e| ServiceError::Config(format!("scoring task failed: {e}")))??;
    tracing::info!(
        submission_id = response.submission_id,
        mean_f1 = response.mean_f1,
        "scored submission"
    );
    Ok((StatusCode::CREATED, Json(response)).into_response())
}

async fn leaderboard(State(p): State<Arc<Platform>>) -> Response {
    Json(p.leaderboard()).into_response()
}

async fn history(
    State(p): State<Arc<Platform>>,
    Path(team_id): Path<String>,
) -> std::result::Result<Response, ServiceError> {
    Ok(Json(p.history(&team_id)?).into_response())
}

pub fn router(platform: Arc<Platform>) -> Router {
    Router::new()
        .route("/api/v1/submissions", post(submit))
        .route("/api/v1/leaderboard", get(leaderboard))
        .route("/api/v1/teams/{team_id}/submissions", get(history))
        .with_state(platform)
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    listener: TcpListener,
    platform: Arc<Platform>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(platform))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Loads configuration, replays the log and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<()> {
    let platform = Arc::new(config.build_platform()?);
    let listener = TcpListener::bind(config.addr)
        .await
        .map_err(|e| ServiceError::Config(format!("cannot bind {}: {e}", config.addr)))?;
    let local = listener
        .local_addr()
        .map_err(|e| ServiceError::Config(e.to_string()))?;
    tracing::info!(addr = %local, "listening");
    serve_on(listener, platform, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
    .map_err(|e| ServiceError::Config(format!("server error: {e}")))
}

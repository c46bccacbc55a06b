//! JSON-over-HTTP surface for the labeling UI.
//!
//! | route | |
//! |---|---|
//! | `GET /api/state` | round, progress and counts |
//! | `GET /api/queue?annotator=ID` | queue items `ID` has not answered |
//! | `POST /api/annotations` | `{annotator_id, post_id, label}` or `{..., skip: true}`; replies with the outcome and score |
//! | `POST /api/rounds/advance` | train, score and queue the next round |
//! | `GET /api/export` | adopted labels, conflicts and manifest |
//! | `GET /media/{path}` | image files under the media root |
//!
//! The annotator id may also come from the `x-annotator-id` header. Errors
//! are `{"error": "..."}` with 400 for bad input, 409 for rejected
//! annotations or rounds and 500 otherwise.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::export::{export, LabelRow, Manifest};
use super::service::Service;
use super::state::{MergeOutcome, RoundState, Verdict};
use crate::corpus::{mask_text, Label, Post};
use crate::error::Error;

pub const ANNOTATOR_HEADER: &str = "x-annotator-id";

#[derive(Clone)]
pub struct ApiConfig {
    pub media_root: Option<PathBuf>,
    pub english_only: bool,
    /// Maximum items per queue response.
    pub queue_page: usize,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig { media_root: None, english_only: false, queue_page: 50 }
    }
}

#[derive(Clone)]
struct App {
    service: Arc<Service>,
    config: Arc<ApiConfig>,
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0 {
            Error::Annotation(_) | Error::Round(_) => StatusCode::CONFLICT,
            Error::InvalidInput(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct RoundSummary {
    pub round: usize,
    pub model_snapshot_id: String,
    pub queued: usize,
    pub scored: usize,
    pub excluded: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct StateView {
    pub round_index: usize,
    pub model_snapshot_id: String,
    pub labeled: usize,
    pub positives: usize,
    pub negatives: usize,
    pub pool: usize,
    pub pending: usize,
    pub conflicts: usize,
    pub annotators: Vec<String>,
    pub n_stop: usize,
    pub should_stop: bool,
    /// Adopted posts by provenance (`seed`, `round_1`, ...).
    pub adopted: BTreeMap<String, usize>,
    pub rounds: Vec<RoundSummary>,
}

impl StateView {
    pub fn of(s: &RoundState) -> StateView {
        let (positives, negatives) = s.label_counts();
        StateView {
            round_index: s.round_index,
            model_snapshot_id: s.model_snapshot_id.clone(),
            labeled: s.labeled.len(),
            positives,
            negatives,
            pool: s.pool_len(),
            pending: s.pending_queue.len(),
            conflicts: s.conflicts.len(),
            annotators: s.annotators.iter().cloned().collect(),
            n_stop: s.config.n_stop,
            should_stop: s.should_stop(),
            adopted: s.adopted_per_round().into_iter().map(|(p, n)| (p.to_string(), n)).collect(),
            rounds: s
                .rounds
                .iter()
                .map(|r| RoundSummary {
                    round: r.round,
                    model_snapshot_id: r.model_snapshot_id.clone(),
                    queued: r.queued.len(),
                    scored: r.scored,
                    excluded: r.excluded,
                })
                .collect(),
        }
    }
}

/// A queued post as annotators see it: mentions and URLs masked, no score.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct QueuePost {
    pub post_id: String,
    pub created_at: DateTime<Utc>,
    pub text: String,
    pub image_urls: Vec<String>,
    pub ocr_text: Option<String>,
    pub is_repost: bool,
}

impl QueuePost {
    fn of(p: &Post) -> QueuePost {
        QueuePost {
            post_id: p.post_id.clone(),
            created_at: p.created_at,
            text: mask_text(&p.text),
            image_urls: p.image_refs.iter().map(|r| format!("/media/{}", r.trim_start_matches('/'))).collect(),
            ocr_text: p.ocr_text.as_deref().map(mask_text),
            is_repost: p.is_repost,
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct QueueView {
    pub annotator_id: String,
    pub round_index: usize,
    /// Items left for this annotator, including those beyond this page.
    pub remaining: usize,
    pub items: Vec<QueuePost>,
}

#[derive(Debug, Deserialize)]
pub struct QueueParams {
    pub annotator: Option<String>,
    pub limit: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnnotationBody {
    #[serde(default)]
    pub annotator_id: Option<String>,
    pub post_id: String,
    #[serde(default)]
    pub label: Option<Verdict>,
    #[serde(default)]
    pub skip: bool,
}

/// The merge outcome plus the model score, revealed only once the verdict
/// is in.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct AnnotationReply {
    #[serde(flatten)]
    pub outcome: MergeOutcome,
    pub score: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct ExportView {
    pub manifest: Manifest,
    pub labels: Vec<LabelRow>,
    pub conflicts: BTreeMap<String, BTreeMap<String, Label>>,
}

fn annotator(explicit: Option<String>, headers: &HeaderMap) -> Result<String, ApiError> {
    explicit
        .or_else(|| headers.get(ANNOTATOR_HEADER).and_then(|v| v.to_str().ok()).map(String::from))
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| ApiError(Error::InvalidInput(format!("annotator id required (query, body or {ANNOTATOR_HEADER} header)"))))
}

async fn get_state(State(app): State<App>) -> Json<StateView> {
    Json(StateView::of(&app.service.state()))
}

async fn get_queue(State(app): State<App>, Query(q): Query<QueueParams>, headers: HeaderMap) -> ApiResult<QueueView> {
    let who = annotator(q.annotator, &headers)?;
    let state = app.service.state();
    let corpus = app.service.corpus();
    let open = state.queue_for(&who);
    let limit = q.limit.unwrap_or(app.config.queue_page);
    let items = open
        .iter()
        .take(limit)
        .filter_map(|item| corpus.get(&item.post_id))
        .map(QueuePost::of)
        .collect();
    Ok(Json(QueueView { annotator_id: who, round_index: state.round_index, remaining: open.len(), items }))
}

async fn post_annotation(
    State(app): State<App>,
    headers: HeaderMap,
    Json(body): Json<AnnotationBody>,
) -> ApiResult<AnnotationReply> {
    let who = annotator(body.annotator_id, &headers)?;
    let verdict = match (body.label, body.skip) {
        (_, true) => Verdict::Skip,
        (Some(v), false) => v,
        (None, false) => return Err(Error::InvalidInput("either label or skip is required".into()).into()),
    };
    let score = app
        .service
        .state()
        .pending_queue
        .iter()
        .find(|q| q.post_id == body.post_id)
        .and_then(|q| q.score);
    let service = app.service.clone();
    let outcome = tokio::task::spawn_blocking(move || service.submit(&who, &body.post_id, verdict))
        .await
        .map_err(|e| Error::Invariant(format!("annotation task failed: {e}")))??;
    Ok(Json(AnnotationReply { outcome, score }))
}

async fn advance(State(app): State<App>) -> ApiResult<StateView> {
    let service = app.service.clone();
    let state = tokio::task::spawn_blocking(move || service.run_round())
        .await
        .map_err(|e| Error::Invariant(format!("round task failed: {e}")))??;
    Ok(Json(StateView::of(&state)))
}

async fn get_export(State(app): State<App>) -> ApiResult<ExportView> {
    let state = app.service.state();
    let e = export(&state, app.service.corpus(), app.config.english_only)?;
    Ok(Json(ExportView { manifest: e.manifest, labels: e.labels, conflicts: state.conflicts.clone() }))
}

/// Resolves a request path below `root`, refusing anything that could climb
/// out of it.
fn media_path(root: &Path, rel: &str) -> Option<PathBuf> {
    let rel = Path::new(rel);
    rel.components().all(|c| matches!(c, Component::Normal(_))).then(|| root.join(rel))
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
}

async fn get_media(State(app): State<App>, axum::extract::Path(rel): axum::extract::Path<String>) -> Response {
    let Some(path) = app.config.media_root.as_deref().and_then(|root| media_path(root, &rel)) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

pub fn router(service: Arc<Service>, config: ApiConfig) -> Router {
    Router::new()
        .route("/api/state", get(get_state))
        .route("/api/queue", get(get_queue))
        .route("/api/annotations", post(post_annotation))
        .route("/api/rounds/advance", post(advance))
        .route("/api/export", get(get_export))
        .route("/media/{*path}", get(get_media))
        .with_state(App { service, config: Arc::new(config) })
}

/// Serves the API on `addr` until the process ends.
pub async fn serve(service: Arc<Service>, config: ApiConfig, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("labeling service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service, config)).await
}

/// Runs [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(service: Arc<Service>, config: ApiConfig, addr: SocketAddr) -> crate::Result<()> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
    rt.block_on(serve(service, config, addr)).map_err(|e| Error::io(addr.to_string(), e))
}

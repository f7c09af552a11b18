use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use memorypod::narrative::{summarize, Summary};
use memorypod::pod::codec::CodecError;
use memorypod::pod::ValidationReport;
use memorypod::replay::{open_session, ReplayError};
use memorypod::{MemoryPod, Timestamp};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::store::StoreError;
use crate::views::{keyframe_views, mesh_view, pod_info, ModeSpec};
use crate::{stream, AppState};

const MAX_UPLOAD_BYTES: usize = 1 << 30;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/pods", get(list).post(upload).layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES)))
        .route("/pods/{id}", get(info))
        .route("/pods/{id}/file", get(file))
        .route("/pods/{id}/keyframes", get(keyframes))
        .route("/pods/{id}/summary", get(summary))
        .route("/pods/{id}/mesh", get(mesh))
        .route("/pods/{id}/zones", get(zones))
        .route("/pods/{id}/frame", get(frame))
        .route("/pods/{id}/replay", get(stream::replay))
        .with_state(state)
}

#[derive(Debug)]
pub(crate) struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
    report: Option<ValidationReport>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        ApiError { status, code, detail: detail.into(), report: None }
    }

    pub(crate) fn not_found(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no pod {id:?}"))
    }

    fn internal(detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.code, "detail": self.detail});
        if let Some(report) = self.report {
            body["report"] = serde_json::to_value(report).unwrap_or_default();
        }
        (self.status, Json(body)).into_response()
    }
}

pub fn codec_error_code(e: &CodecError) -> &'static str {
    match e {
        CodecError::BadMagic => "bad_magic",
        CodecError::UnsupportedVersion(_) => "unsupported_version",
        CodecError::UnsupportedFlags(_) => "unsupported_flags",
        CodecError::TruncatedSection(_) => "truncated",
        CodecError::ChecksumMismatch(_) => "checksum_mismatch",
        CodecError::InvalidPod(_) => "invalid_pod",
        _ => "bad_file",
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Decode(CodecError::InvalidPod(report)) => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                code: "invalid_pod",
                detail: report.to_string(),
                report: Some(report),
            },
            StoreError::Decode(c) => ApiError::new(StatusCode::BAD_REQUEST, codec_error_code(&c), c.to_string()),
            other => ApiError::new(StatusCode::INSUFFICIENT_STORAGE, "storage_failure", other.to_string()),
        }
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))
}

fn pod_or_404(state: &AppState, id: &str) -> Result<Arc<MemoryPod>, ApiError> {
    state.store.pod(id).ok_or_else(|| ApiError::not_found(id))
}

#[derive(Serialize)]
struct Created {
    pod_id: String,
}

async fn upload(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let store = state.store.clone();
    let pod_id = blocking(move || store.insert(&body)).await??;
    tracing::info!(%pod_id, "stored pod");
    Ok((StatusCode::CREATED, Json(Created { pod_id })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PodListItem {
    pub pod_id: String,
    pub title: String,
    pub created_at: String,
    pub duration_us: u64,
    pub annotation_count: usize,
}

async fn list(State(state): State<AppState>) -> Json<Vec<PodListItem>> {
    let manifest = state.store.manifest();
    Json(
        manifest
            .pods
            .iter()
            .map(|(id, e)| PodListItem {
                pod_id: id.clone(),
                title: e.title.clone(),
                created_at: e.created_at.clone(),
                duration_us: e.duration_us,
                annotation_count: e.annotation_count,
            })
            .collect(),
    )
}

async fn info(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let pod = pod_or_404(&state, &id)?;
    Ok(Json(pod_info(&id, &pod)))
}

async fn file(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let store = state.store.clone();
    let lookup = id.clone();
    let bytes = blocking(move || store.file(&lookup)).await??.ok_or_else(|| ApiError::not_found(&id))?;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes))
}

async fn keyframes(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let pod = pod_or_404(&state, &id)?;
    Ok(Json(keyframe_views(&pod)))
}

#[derive(Deserialize)]
struct SummaryQuery {
    refresh: Option<String>,
}

async fn summary(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SummaryQuery>,
) -> Result<Json<Summary>, ApiError> {
    let pod = pod_or_404(&state, &id)?;
    let refresh = matches!(q.refresh.as_deref(), Some("1" | "true"));
    let store = state.store.clone();
    let backend = state.summarizer.clone();
    let summary = blocking(move || -> Result<Summary, StoreError> {
        if !refresh {
            if let Some(cached) = store.cached_summary(&id) {
                return Ok(cached);
            }
        }
        let s = summarize(&pod, &backend);
        store.store_summary(&id, &s)?;
        Ok(s)
    })
    .await??;
    Ok(Json(summary))
}

async fn mesh(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(spec): Query<ModeSpec>,
) -> Result<impl IntoResponse, ApiError> {
    let pod = pod_or_404(&state, &id)?;
    let mode = if spec == ModeSpec::default() {
        None
    } else {
        Some(spec.resolve(&pod).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_mode", e))?)
    };
    Ok(Json(mesh_view(&pod, mode.as_ref())))
}

async fn zones(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(pod_or_404(&state, &id)?.zones.clone()))
}

#[derive(Deserialize)]
struct FrameQuery {
    t_us: u64,
    mode: Option<String>,
    scale: Option<f64>,
    anchor: Option<String>,
    placement: Option<String>,
}

async fn frame(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FrameQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let pod = pod_or_404(&state, &id)?;
    let spec = ModeSpec { mode: q.mode, scale: q.scale, anchor: q.anchor, placement: q.placement };
    let mode = spec.resolve(&pod).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_mode", e))?;
    let session = open_session(pod, mode).map_err(|e| ApiError::internal(e.to_string()))?;
    match session.frame_at(Timestamp(q.t_us)) {
        Ok(f) => Ok(Json(f)),
        Err(e @ ReplayError::OutOfRange { .. }) => Err(ApiError::new(StatusCode::BAD_REQUEST, "out_of_range", e.to_string())),
        Err(e) => Err(ApiError::internal(e.to_string())),
    }
}

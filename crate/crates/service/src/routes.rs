use std::collections::HashMap;
use std::io::Cursor;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use fcxl_core::crop::PixelBox;
use fcxl_core::interaction::Interaction;
use fcxl_core::mask::io::{decode_mask_png, encode_mask_png, encode_rle, Rle};
use fcxl_core::pipeline::{SessionState, Timings};
use fcxl_core::{iou, BinaryMask};
use image::{ImageReader, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::store::SessionEntry;
use crate::AppState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub id: String,
    /// Unix seconds.
    pub created_at: u64,
    pub backend: String,
    pub width: usize,
    pub height: usize,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResponse {
    pub mask_rle: Rle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iou_vs_gt: Option<f64>,
    pub focus_box: PixelBox,
    pub target_box: PixelBox,
    pub round: usize,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndoResponse {
    pub mask_rle: Rle,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryItem {
    pub kind: String,
    pub target_box: PixelBox,
    pub focus_box: PixelBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    #[serde(flatten)]
    pub handle: SessionHandle,
    pub started_from_mask: bool,
    pub mask_area: usize,
    pub context_ready: bool,
    pub history: Vec<HistoryItem>,
}

pub(crate) fn api() -> Router<AppState> {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(summary).delete(delete_session))
        .route("/v1/sessions/{id}/interactions", post(interact))
        .route("/v1/sessions/{id}/undo", post(undo))
        .route("/v1/sessions/{id}/mask.png", get(mask_png))
}

async fn healthz(State(app): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "sessions": app.store.len() }))
}

fn handle_of(entry: &SessionEntry, state: &SessionState) -> SessionHandle {
    let (width, height) = state.dims();
    SessionHandle {
        id: entry.id.clone(),
        created_at: entry.created_at,
        backend: entry.backend_name.clone(),
        width,
        height,
        round: state.round(),
    }
}

fn lookup(app: &AppState, id: &str) -> Result<Arc<SessionEntry>, ApiError> {
    let entry = app.store.get(id).ok_or_else(|| ApiError::not_found(id))?;
    entry.touch();
    Ok(entry)
}

/// Reads image dimensions from the header and rejects oversized inputs
/// before decoding any pixels.
fn probe_dims(bytes: &[u8], what: &str, max_pixels: u64) -> Result<(u32, u32), ApiError> {
    let (w, h) = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| ApiError::bad_request("undecodable-image", format!("{what}: {e}")))?
        .into_dimensions()
        .map_err(|e| ApiError::bad_request("undecodable-image", format!("{what}: {e}")))?;
    if w as u64 * h as u64 > max_pixels {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "image-too-large",
            format!("{what} is {w}x{h}, limit is {max_pixels} pixels"),
        ));
    }
    Ok((w, h))
}

fn decode_image(bytes: &[u8], max_pixels: u64) -> Result<RgbImage, ApiError> {
    probe_dims(bytes, "image", max_pixels)?;
    let img = image::load_from_memory(bytes)
        .map_err(|e| ApiError::bad_request("undecodable-image", format!("image: {e}")))?;
    Ok(img.to_rgb8())
}

fn decode_mask_field(
    bytes: &[u8],
    what: &str,
    (w, h): (u32, u32),
    max_pixels: u64,
) -> Result<BinaryMask, ApiError> {
    let (mw, mh) = probe_dims(bytes, what, max_pixels)?;
    if (mw, mh) != (w, h) {
        return Err(ApiError::bad_request(
            "dimension-mismatch",
            format!("{what} is {mw}x{mh} but the image is {w}x{h}"),
        ));
    }
    decode_mask_png(bytes).map_err(|e| ApiError::bad_request("undecodable-image", format!("{what}: {e}")))
}

async fn create_session(
    State(app): State<AppState>,
    Query(query): Query<HashMap<String, String>>,
    mut multipart: Multipart,
) -> Result<impl IntoResponse, ApiError> {
    let mut fields: HashMap<String, Bytes> = HashMap::new();
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::new(e.status(), "bad-multipart", e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let data = field
            .bytes()
            .await
            .map_err(|e| ApiError::new(e.status(), "bad-multipart", e.body_text()))?;
        fields.insert(name, data);
    }
    let max_pixels = app.config.max_pixels;
    let image_bytes = fields
        .remove("image")
        .ok_or_else(|| ApiError::bad_request("missing-image", "multipart field `image` is required"))?;
    let image = tokio::task::spawn_blocking(move || decode_image(&image_bytes, max_pixels))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    let dims = image.dimensions();
    let initial = fields
        .get("initial_mask")
        .map(|b| decode_mask_field(b, "initial_mask", dims, max_pixels))
        .transpose()?;
    let gt = fields
        .get("gt_mask")
        .map(|b| decode_mask_field(b, "gt_mask", dims, max_pixels))
        .transpose()?;

    let (backend_name, backend) = app
        .factory
        .create(query.get("backend").map(String::as_str), gt.as_ref())?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let image = Arc::new(image);
    let state = SessionState::new(id.clone(), image.clone(), initial, app.config.session)
        .map_err(|e| ApiError::bad_request(e.code(), e.to_string()))?;
    let entry = app.store.insert(SessionEntry::new(state, backend_name, backend, gt));
    let handle = {
        let state = entry.state.lock().await;
        handle_of(&entry, &state)
    };
    tracing::info!(session = %id, backend = %entry.backend_name, w = dims.0, h = dims.1, "session created");

    // Context precompute runs detached; rounds that start before it lands
    // simply go without the token.
    let ctx_entry = entry.clone();
    tokio::task::spawn_blocking(move || {
        match ctx_entry.backend.context_precompute(&ctx_entry.id, &image) {
            Ok(Some(token)) => ctx_entry.deliver_context(token),
            Ok(None) => {}
            Err(e) => tracing::warn!(session = %ctx_entry.id, "context precompute failed: {e}"),
        }
    });
    Ok((StatusCode::CREATED, Json(handle)))
}

async fn interact(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<RoundResponse>, ApiError> {
    let entry = lookup(&app, &id)?;
    let interaction: Interaction =
        serde_json::from_slice(&body).map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let mut guard = entry.state.clone().try_lock_owned().map_err(|_| ApiError::busy())?;
    let worker = entry.clone();
    let resp = tokio::task::spawn_blocking(move || -> Result<RoundResponse, ApiError> {
        worker.adopt_context(&mut guard);
        let r = guard.run_round(worker.backend.as_ref(), &interaction)?;
        let iou_vs_gt = match &worker.gt {
            Some(gt) => Some(iou(&r.mask, gt)?),
            None => None,
        };
        Ok(RoundResponse {
            mask_rle: encode_rle(&r.mask),
            iou_vs_gt,
            focus_box: r.focus_box,
            target_box: r.target_box,
            round: r.round,
            timings: r.timings,
        })
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    entry.touch();
    Ok(Json(resp))
}

async fn undo(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<UndoResponse>, ApiError> {
    let entry = lookup(&app, &id)?;
    let mut state = entry.state.try_lock().map_err(|_| ApiError::busy())?;
    state.undo()?;
    Ok(Json(UndoResponse {
        mask_rle: encode_rle(state.mask()),
        round: state.round(),
    }))
}

async fn summary(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionSummary>, ApiError> {
    let entry = lookup(&app, &id)?;
    let mut state = entry.state.lock().await;
    entry.adopt_context(&mut state);
    Ok(Json(SessionSummary {
        handle: handle_of(&entry, &state),
        started_from_mask: state.started_from_mask(),
        mask_area: state.mask().count(),
        context_ready: state.context_token().is_some(),
        history: state
            .history()
            .iter()
            .map(|r| HistoryItem {
                kind: r.interaction.kind().to_string(),
                target_box: r.target_box,
                focus_box: r.focus_box,
            })
            .collect(),
    }))
}

async fn mask_png(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let entry = lookup(&app, &id)?;
    let mask = entry.state.lock().await.mask().clone();
    let png = tokio::task::spawn_blocking(move || encode_mask_png(&mask))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png))
}

async fn delete_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    app.store.remove(&id).ok_or_else(|| ApiError::not_found(&id))?;
    tracing::info!(session = %id, "session deleted");
    Ok(StatusCode::NO_CONTENT)
}

//! Interactive refocus over HTTP.
//!
//! A session holds one uploaded image and its disparity map. Render requests
//! pick a focal plane (by clicking a pixel or giving `df` directly) and a
//! blur intensity, and get back a PNG rendered at preview resolution.
//! Export renders the same thing at full resolution.
//!
//! Routes:
//! - `POST /sessions` multipart `image` + `disparity` → `{"id": ...}`
//! - `GET /sessions/{id}` → session info
//! - `DELETE /sessions/{id}`
//! - `POST /sessions/{id}/render` JSON [`RenderRequest`] → PNG
//! - `GET /sessions/{id}/export?k=..&df=..` → full-resolution PNG
//! - `GET /healthz`
//!
//! Errors are JSON `{"code": ..., "message": ...}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bokeh_core::defocus::compute_defocus;
use bokeh_core::image::ResizeFilter;
use bokeh_core::render::{render_scatter, RenderConfig};
use bokeh_core::{io, Disparity, Image, Lens};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tower_http::cors::CorsLayer;

pub const MAX_BLUR_INTENSITY: f32 = 64.0;
/// Default preview size cap on the long edge.
pub const PREVIEW_LONG_EDGE: usize = 1024;
const MAX_UPLOAD_BYTES: usize = 256 << 20;

pub const FOCAL_DISPARITY_HEADER: &str = "x-focal-disparity";
pub const BLUR_INTENSITY_HEADER: &str = "x-blur-intensity";
pub const RENDER_MS_HEADER: &str = "x-render-ms";
pub const PREVIEW_SIZE_HEADER: &str = "x-preview-size";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    fn unprocessable(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session {id}"))
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Body of `POST /sessions/{id}/render`. Give either a point `(x, y)` in
/// full-resolution pixel coordinates or an explicit `df`; with neither, the
/// session's current focal disparity is kept.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderRequest {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub df: Option<f32>,
    pub k: f32,
    /// Preview scale in `(0, 1]`; defaults to fitting the long edge within
    /// [`PREVIEW_LONG_EDGE`].
    pub preview_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ExportQuery {
    pub k: Option<f32>,
    pub df: Option<f32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub blur_intensity: f32,
    pub focal_disparity: f32,
}

struct Session {
    image: Arc<Image>,
    disparity: Arc<Disparity>,
    /// Held for the whole of a request, so requests on one session run one
    /// at a time.
    state: Mutex<SessionState>,
}

struct SessionState {
    lens: Lens,
    previews: HashMap<(usize, usize), (Arc<Image>, Arc<Disparity>)>,
}

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl AppState {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Session>> {
        self.sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info).delete(delete_session))
        .route("/sessions/{id}/render", post(render))
        .route("/sessions/{id}/export", get(export))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new())).await
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "version": bokeh_core::PIPELINE_VERSION }))
}

async fn create_session(State(app): State<Arc<AppState>>, mut form: Multipart) -> ApiResult<Json<serde_json::Value>> {
    let mut image_bytes = None;
    let mut disparity_bytes = None;
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request(e.to_string()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| ApiError::bad_request(e.to_string()))?;
        match name.as_str() {
            "image" => image_bytes = Some(bytes),
            "disparity" => disparity_bytes = Some(bytes),
            other => log::debug!("ignoring multipart field {other:?}"),
        }
    }
    let image_bytes = image_bytes.ok_or_else(|| ApiError::bad_request("missing multipart field \"image\""))?;
    let disparity_bytes = disparity_bytes.ok_or_else(|| {
        ApiError::unprocessable(
            "disparity_required",
            "no disparity uploaded; depth estimation is not built in, so produce a disparity map externally and upload it as \"disparity\"",
        )
    })?;

    let (image, disparity) = tokio::task::spawn_blocking(move || {
        let image = io::decode_linear::<f32>(&image_bytes).map_err(|e| ApiError::bad_request(format!("image: {e}")))?;
        let disparity =
            io::decode_field::<f32>(&disparity_bytes).map_err(|e| ApiError::bad_request(format!("disparity: {e}")))?;
        Ok::<_, ApiError>((image, disparity))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;

    if image.dims() != disparity.dims() {
        return Err(ApiError::unprocessable(
            "dimension_mismatch",
            format!("image is {:?} but disparity is {:?}", image.dims(), disparity.dims()),
        ));
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session {
        image: Arc::new(image),
        disparity: Arc::new(disparity),
        state: Mutex::new(SessionState {
            lens: Lens::all_in_focus(),
            previews: HashMap::new(),
        }),
    };
    app.sessions
        .write()
        .expect("session table poisoned")
        .insert(id.clone(), Arc::new(session));
    Ok(Json(serde_json::json!({ "id": id })))
}

async fn session_info(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionInfo>> {
    let s = app.session(&id)?;
    let lens = s.state.lock().await.lens;
    let (width, height) = s.image.dims();
    Ok(Json(SessionInfo {
        id,
        width,
        height,
        blur_intensity: lens.blur_intensity,
        focal_disparity: lens.focal_disparity,
    }))
}

async fn delete_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    match app.sessions.write().expect("session table poisoned").remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::not_found(&id)),
    }
}

fn check_k(k: f32) -> ApiResult<()> {
    if !(0.0..=MAX_BLUR_INTENSITY).contains(&k) {
        return Err(ApiError::unprocessable(
            "invalid_blur_intensity",
            format!("k must lie in [0, {MAX_BLUR_INTENSITY}], got {k}"),
        ));
    }
    Ok(())
}

fn check_df(df: f32) -> ApiResult<()> {
    if !(0.0..=1.0).contains(&df) {
        return Err(ApiError::unprocessable(
            "invalid_focal_disparity",
            format!("df must lie in [0, 1], got {df}"),
        ));
    }
    Ok(())
}

/// Focal disparity for a request: the disparity under the clicked pixel, an
/// explicit `df`, or the current one.
pub fn resolve_focus(req: &RenderRequest, disparity: &Disparity, current: f32) -> ApiResult<f32> {
    match (req.x, req.y, req.df) {
        (Some(x), Some(y), None) => {
            let (w, h) = disparity.dims();
            if !(x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64) {
                return Err(ApiError::unprocessable(
                    "point_out_of_bounds",
                    format!("point ({x}, {y}) lies outside the {w}x{h} image"),
                ));
            }
            Ok(disparity.get(x as usize, y as usize).clamp(0.0, 1.0))
        }
        (None, None, Some(df)) => {
            check_df(df)?;
            Ok(df)
        }
        (None, None, None) => Ok(current),
        _ => Err(ApiError::unprocessable(
            "ambiguous_focus",
            "give both x and y, or df, but not both",
        )),
    }
}

/// Size of a preview of `dims` at `scale`.
pub fn preview_dims(dims: (usize, usize), scale: f64) -> (usize, usize) {
    let s = |v: usize| ((v as f64 * scale).round() as usize).max(1);
    (s(dims.0), s(dims.1))
}

pub fn default_preview_scale(dims: (usize, usize)) -> f64 {
    let long = dims.0.max(dims.1);
    if long <= PREVIEW_LONG_EDGE {
        1.0
    } else {
        PREVIEW_LONG_EDGE as f64 / long as f64
    }
}

/// Renders `image` refocused through `lens`. When the image is a scaled
/// preview, `scale` shrinks the blur intensity by the same factor so the
/// preview looks like a downsized export.
pub fn render_view(image: &Image, disparity: &Disparity, lens: &Lens, scale: f64) -> bokeh_core::Result<Image> {
    let lens = Lens {
        blur_intensity: (f64::from(lens.blur_intensity) * scale) as f32,
        ..*lens
    };
    let defocus = compute_defocus(disparity, &lens)?.into_inner();
    render_scatter(image, &defocus, &RenderConfig::for_lens(&lens))
}

fn png_response(png: Vec<u8>, lens: &Lens, millis: f64, dims: (usize, usize)) -> Response {
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    let mut put = |name: &'static str, value: String| {
        if let Ok(v) = HeaderValue::from_str(&value) {
            headers.insert(HeaderName::from_static(name), v);
        }
    };
    put(FOCAL_DISPARITY_HEADER, lens.focal_disparity.to_string());
    put(BLUR_INTENSITY_HEADER, lens.blur_intensity.to_string());
    put(RENDER_MS_HEADER, format!("{millis:.3}"));
    put(PREVIEW_SIZE_HEADER, format!("{}x{}", dims.0, dims.1));
    (StatusCode::OK, headers, png).into_response()
}

async fn render_png(image: Arc<Image>, disparity: Arc<Disparity>, lens: Lens, scale: f64) -> ApiResult<(Vec<u8>, f64)> {
    tokio::task::spawn_blocking(move || {
        let start = Instant::now();
        let out = render_view(&image, &disparity, &lens, scale).map_err(|e| ApiError::internal(e.to_string()))?;
        let millis = start.elapsed().as_secs_f64() * 1e3;
        let png = io::encode_linear_png(&out).map_err(|e| ApiError::internal(e.to_string()))?;
        Ok((png, millis))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn render(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: RenderRequest = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let session = app.session(&id)?;
    check_k(req.k)?;
    let mut state = session.state.lock().await;
    let df = resolve_focus(&req, &session.disparity, state.lens.focal_disparity)?;
    let full = session.image.dims();
    let scale = match req.preview_scale {
        Some(s) if s > 0.0 && s <= 1.0 => s,
        Some(s) => {
            return Err(ApiError::unprocessable(
                "invalid_preview_scale",
                format!("preview_scale must lie in (0, 1], got {s}"),
            ))
        }
        None => default_preview_scale(full),
    };
    let dims = preview_dims(full, scale);
    let (image, disparity) = if dims == full {
        (session.image.clone(), session.disparity.clone())
    } else {
        match state.previews.get(&dims) {
            Some(p) => p.clone(),
            None => {
                let (img, disp) = (session.image.clone(), session.disparity.clone());
                let pair = tokio::task::spawn_blocking(move || {
                    let i = img.resize(dims.0, dims.1, ResizeFilter::Area)?;
                    let d = disp.resize(dims.0, dims.1, ResizeFilter::Nearest)?;
                    Ok::<_, bokeh_core::Error>((Arc::new(i), Arc::new(d)))
                })
                .await
                .map_err(|e| ApiError::internal(e.to_string()))?
                .map_err(|e| ApiError::internal(e.to_string()))?;
                state.previews.insert(dims, pair.clone());
                pair
            }
        }
    };
    let lens = Lens {
        blur_intensity: req.k,
        focal_disparity: df,
    };
    let actual_scale = dims.0 as f64 / full.0 as f64;
    let (png, millis) = render_png(image, disparity, lens, actual_scale).await?;
    state.lens = lens;
    Ok(png_response(png, &lens, millis, dims))
}

async fn export(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<ExportQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let session = app.session(&id)?;
    let state = session.state.lock().await;
    let k = q.k.unwrap_or(state.lens.blur_intensity);
    let df = q.df.unwrap_or(state.lens.focal_disparity);
    check_k(k)?;
    check_df(df)?;
    let lens = Lens {
        blur_intensity: k,
        focal_disparity: df,
    };
    let (png, millis) = render_png(session.image.clone(), session.disparity.clone(), lens, 1.0).await?;
    drop(state);
    Ok(png_response(png, &lens, millis, session.image.dims()))
}

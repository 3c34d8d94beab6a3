//! HTTP service for tuning degradation parameters interactively: upload
//! volumes, run degradations, view slices and radial spectra, compare them
//! against a reference spectrum and keep named presets.
//!
//! Every endpoint is a thin adapter over the `ulfsim` library.

pub mod cache;
pub mod error;
pub mod presets;
pub mod state;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;
use ulfsim::dataset::{preset_fragment, spectrum_json};
use ulfsim::kspace::{Axis, DegradationParams, DegradationReport};
use ulfsim::metrics::{compare_spectra, spectrum_report, SpectrumComparison};
use ulfsim::nifti::{encode_volume, read_volume_bytes, DataType};
use ulfsim::sampling::ParamRanges;
use ulfsim::slice::{extract_slice, to_gray16, to_gray8, Window};
use ulfsim::Volume;

pub use error::{ApiError, ApiResult};
pub use presets::{Preset, PresetStore};
pub use state::{result_id, AppState};

pub const DEFAULT_PORT: u16 = 8750;
pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 512 << 20;
pub const DEFAULT_CACHE_BYTES: usize = 1 << 30;
pub const DEFAULT_SPECTRUM_BINS: usize = 32;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub port: u16,
    pub max_upload_bytes: usize,
    pub cache_bytes: usize,
    /// JSON file the preset store is loaded from and saved to.
    pub presets_path: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            port: DEFAULT_PORT,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            cache_bytes: DEFAULT_CACHE_BYTES,
            presets_path: None,
        }
    }
}

type Shared = Arc<AppState>;

pub fn app(cfg: &ServiceConfig) -> std::io::Result<Router> {
    let presets = match &cfg.presets_path {
        Some(p) => PresetStore::open(p)?,
        None => PresetStore::in_memory(),
    };
    Ok(router(
        Arc::new(AppState::new(cfg.cache_bytes, presets)),
        cfg.max_upload_bytes,
    ))
}

pub fn router(state: Shared, max_upload_bytes: usize) -> Router {
    Router::new()
        .route("/session", get(session))
        .route("/volumes", post(upload).get(list_volumes))
        .route("/volumes/{id}/slice", get(volume_slice))
        .route("/volumes/{id}/spectrum", get(volume_spectrum))
        .route("/degrade", post(degrade))
        .route("/results/{id}", get(result_info))
        .route("/results/{id}/volume", get(result_volume))
        .route("/results/{id}/slice", get(result_slice))
        .route("/results/{id}/spectrum", get(result_spectrum))
        .route("/reference-spectrum", post(set_reference))
        .route("/compare", get(compare))
        .route("/presets", post(create_preset).get(list_presets))
        .route("/presets/{name}", get(get_preset).delete(delete_preset))
        .route("/presets/{name}/export", get(export_preset))
        .layer(DefaultBodyLimit::max(max_upload_bytes))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Binds `0.0.0.0:port` and serves until Ctrl-C.
pub async fn serve(cfg: ServiceConfig) -> std::io::Result<()> {
    let app = app(&cfg)?;
    let listener =
        tokio::net::TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], cfg.port))).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn session(State(s): State<Shared>) -> Json<serde_json::Value> {
    let (entries, used, budget) = s.cache_stats();
    Json(json!({
        "session_id": s.session_id,
        "volumes": s.volume_ids().len(),
        "cached_results": entries,
        "cache_bytes_used": used,
        "cache_bytes_budget": budget,
        "computations": s.computations(),
    }))
}

#[derive(Serialize)]
struct VolumeInfo {
    volume_id: String,
    shape: [usize; 3],
    spacing: [f64; 3],
}

fn info(id: String, v: &Volume) -> VolumeInfo {
    VolumeInfo {
        volume_id: id,
        shape: v.shape(),
        spacing: v.spacing(),
    }
}

async fn upload(State(s): State<Shared>, body: Bytes) -> ApiResult<Json<VolumeInfo>> {
    let v = tokio::task::spawn_blocking(move || read_volume_bytes(&body))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    let out = info(String::new(), &v);
    let id = s.add_volume(v);
    Ok(Json(VolumeInfo {
        volume_id: id,
        ..out
    }))
}

async fn list_volumes(State(s): State<Shared>) -> Json<Vec<VolumeInfo>> {
    Json(
        s.volume_ids()
            .into_iter()
            .map(|(id, v)| info(id, &v))
            .collect(),
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradeRequest {
    pub volume_id: String,
    pub params: DegradationParams,
    /// Overrides `params.seed` when present.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub allow_out_of_range: bool,
}

#[derive(Serialize, Deserialize)]
pub struct DegradeResponse {
    pub result_id: String,
    pub cache_hit: bool,
    pub report: DegradationReport,
}

async fn degrade(
    State(s): State<Shared>,
    Json(req): Json<DegradeRequest>,
) -> ApiResult<Json<DegradeResponse>> {
    let mut params = req.params;
    if let Some(seed) = req.seed {
        params.seed = seed;
    }
    s.volume(&req.volume_id)?;
    params.validate()?;
    if !req.allow_out_of_range {
        let bad = ParamRanges::default().violations(&params);
        if !bad.is_empty() {
            return Err(ApiError::unprocessable(format!(
                "parameters outside the documented sampling ranges: {}; set allow_out_of_range to explore",
                bad.join(", ")
            )));
        }
    }
    let (result_id, computed, cache_hit) = s.degrade(&req.volume_id, params).await?;
    Ok(Json(DegradeResponse {
        result_id,
        cache_hit,
        report: computed.report.clone(),
    }))
}

async fn result_info(
    State(s): State<Shared>,
    Path(id): Path<String>,
) -> ApiResult<Json<serde_json::Value>> {
    let recipe = s.recipe(&id)?;
    let r = s.result(&id).await?;
    Ok(Json(json!({
        "result_id": id,
        "volume_id": recipe.volume_id,
        "shape": r.volume.shape(),
        "report": r.report,
    })))
}

#[derive(Deserialize)]
struct VolumeQuery {
    datatype: Option<String>,
}

async fn result_volume(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<VolumeQuery>,
) -> ApiResult<Response> {
    let dt = DataType::parse(q.datatype.as_deref().unwrap_or("float64"))?;
    let r = s.result(&id).await?;
    let bytes = encode_volume(&r.volume, dt);
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
}

#[derive(Deserialize)]
struct SliceQuery {
    axis: Option<String>,
    index: Option<usize>,
    window: Option<String>,
    depth: Option<u8>,
}

fn render_slice(v: &Volume, q: &SliceQuery) -> ApiResult<Vec<u8>> {
    let axis = Axis::parse(q.axis.as_deref().unwrap_or("z"))?;
    let index = q.index.unwrap_or(v.shape()[axis.index()] / 2);
    let slice = extract_slice(v, axis, index)?;
    let window = match q.window.as_deref() {
        None | Some("auto") => Window::percentile_default(v),
        Some(w) => Window::parse(w)?,
    };
    let (w, h) = (slice.width as u32, slice.height as u32);
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w, h);
        enc.set_color(png::ColorType::Grayscale);
        let data: Vec<u8> = match q.depth.unwrap_or(8) {
            8 => {
                enc.set_depth(png::BitDepth::Eight);
                to_gray8(&slice, &window)
            }
            16 => {
                enc.set_depth(png::BitDepth::Sixteen);
                to_gray16(&slice, &window)
                    .iter()
                    .flat_map(|p| p.to_be_bytes())
                    .collect()
            }
            d => {
                return Err(ApiError::unprocessable(format!(
                    "depth must be 8 or 16, got {d}"
                )))
            }
        };
        let mut writer = enc
            .write_header()
            .map_err(|e| ApiError::internal(e.to_string()))?;
        writer
            .write_image_data(&data)
            .map_err(|e| ApiError::internal(e.to_string()))?;
    }
    Ok(out)
}

fn png_response(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn volume_slice(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<SliceQuery>,
) -> ApiResult<Response> {
    let v = s.volume(&id)?;
    Ok(png_response(render_slice(&v, &q)?))
}

async fn result_slice(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<SliceQuery>,
) -> ApiResult<Response> {
    Ok(png_response(render_slice(
        &s.result(&id).await?.volume,
        &q,
    )?))
}

#[derive(Deserialize)]
struct BinsQuery {
    bins: Option<usize>,
}

fn json_text(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn volume_spectrum(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<BinsQuery>,
) -> ApiResult<Response> {
    let v = s.volume(&id)?;
    Ok(json_text(spectrum_json(
        &v,
        q.bins.unwrap_or(DEFAULT_SPECTRUM_BINS),
    )?))
}

async fn result_spectrum(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<BinsQuery>,
) -> ApiResult<Response> {
    let r = s.result(&id).await?;
    Ok(json_text(spectrum_json(
        &r.volume,
        q.bins.unwrap_or(DEFAULT_SPECTRUM_BINS),
    )?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceRequest {
    volume_id: Option<String>,
    result_id: Option<String>,
    bins: Option<usize>,
}

async fn set_reference(
    State(s): State<Shared>,
    Json(req): Json<ReferenceRequest>,
) -> ApiResult<Json<state::Reference>> {
    let bins = req.bins.unwrap_or(DEFAULT_SPECTRUM_BINS);
    let (source, volume): (String, Arc<Volume>) = match (req.volume_id, req.result_id) {
        (Some(v), None) => (format!("volume:{v}"), s.volume(&v)?),
        (None, Some(r)) => {
            let computed = s.result(&r).await?;
            (format!("result:{r}"), Arc::new(computed.volume.clone()))
        }
        _ => {
            return Err(ApiError::unprocessable(
                "give exactly one of volume_id or result_id",
            ))
        }
    };
    let reference = state::Reference {
        source,
        bins,
        report: spectrum_report(&volume, bins)?,
    };
    s.set_reference(reference.clone());
    Ok(Json(reference))
}

#[derive(Deserialize)]
struct CompareQuery {
    result_id: String,
}

#[derive(Serialize, Deserialize)]
pub struct CompareResponse {
    pub result_id: String,
    pub reference: String,
    pub bins: usize,
    #[serde(flatten)]
    pub comparison: SpectrumComparison,
}

async fn compare(
    State(s): State<Shared>,
    Query(q): Query<CompareQuery>,
) -> ApiResult<Json<CompareResponse>> {
    let reference = s.reference()?;
    let r = s.result(&q.result_id).await?;
    let report = spectrum_report(&r.volume, reference.bins)?;
    Ok(Json(CompareResponse {
        result_id: q.result_id,
        reference: reference.source,
        bins: reference.bins,
        comparison: compare_spectra(&report, &reference.report)?,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetRequest {
    name: String,
    params: DegradationParams,
    #[serde(default)]
    notes: String,
}

async fn create_preset(
    State(s): State<Shared>,
    Json(req): Json<PresetRequest>,
) -> ApiResult<(StatusCode, Json<Preset>)> {
    let created_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let preset = s.presets.lock().unwrap().create(Preset {
        name: req.name,
        params: req.params,
        created_at,
        notes: req.notes,
    })?;
    Ok((StatusCode::CREATED, Json(preset)))
}

async fn list_presets(State(s): State<Shared>) -> Json<Vec<Preset>> {
    Json(s.presets.lock().unwrap().list())
}

async fn get_preset(State(s): State<Shared>, Path(name): Path<String>) -> ApiResult<Json<Preset>> {
    Ok(Json(s.presets.lock().unwrap().get(&name)?))
}

async fn delete_preset(State(s): State<Shared>, Path(name): Path<String>) -> ApiResult<StatusCode> {
    s.presets.lock().unwrap().delete(&name)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn export_preset(State(s): State<Shared>, Path(name): Path<String>) -> ApiResult<Response> {
    let preset = s.presets.lock().unwrap().get(&name)?;
    let text = preset_fragment(&preset.params)?;
    Ok((
        [
            (header::CONTENT_TYPE, "application/toml".to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{name}.toml\""),
            ),
        ],
        text,
    )
        .into_response())
}

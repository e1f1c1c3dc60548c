//! HTTP service for the point labeling tool.
//!
//! Endpoints (JSON bodies, every body carries `version`):
//!
//! - `GET /clouds` lists registered clouds.
//! - `GET /clouds/{id}` returns positions and colors at the display stride;
//!   display index `i` is full-cloud index `i * stride`.
//! - `POST /labels` appends one submission of full-cloud point labels.
//! - `GET /dataset/stats` reports row counts per class.

pub mod registry;
pub mod store;

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use canopy::features::record_for_point;
use canopy::pcio::LABEL_DATASET_HEADER;
use canopy::{Label, Result as CoreResult};
use serde::{Deserialize, Serialize};

pub use registry::{cloud_id, CloudInfo, CloudRegistry, CloudSource, LoadedCloud};
pub use store::DatasetStore;

pub const API_VERSION: u32 = 1;
pub const DEFAULT_DISPLAY_STRIDE: usize = 5;
pub const DEFAULT_K_NEIGHBORS: usize = 30;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub display_stride: usize,
    pub k_neighbors: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            display_stride: DEFAULT_DISPLAY_STRIDE,
            k_neighbors: DEFAULT_K_NEIGHBORS,
        }
    }
}

pub struct AppState {
    pub registry: CloudRegistry,
    pub store: Mutex<DatasetStore>,
    pub config: ServiceConfig,
}

impl AppState {
    pub fn new(registry: CloudRegistry, dataset_path: impl Into<PathBuf>, config: ServiceConfig) -> CoreResult<Self> {
        Ok(AppState {
            registry,
            store: Mutex::new(DatasetStore::open(dataset_path)?),
            config,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudSummary {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tree_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub week: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudList {
    pub version: u32,
    pub clouds: Vec<CloudSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudPayload {
    pub version: u32,
    pub id: String,
    /// Point count of the full cloud.
    pub n_points: usize,
    pub stride: usize,
    pub positions: Vec<[f32; 3]>,
    pub colors: Vec<[u8; 3]>,
}

impl CloudPayload {
    pub fn full_index(&self, display_index: usize) -> usize {
        display_index * self.stride
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointLabelEntry {
    pub point_index: usize,
    pub label: Label,
}

fn default_version() -> u32 {
    API_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSubmission {
    #[serde(default = "default_version")]
    pub version: u32,
    pub cloud_id: String,
    pub labels: Vec<PointLabelEntry>,
    #[serde(default)]
    pub annotator: String,
    #[serde(default)]
    pub timestamp: String,
    #[serde(default)]
    pub submission_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub version: u32,
    pub appended: usize,
    /// True when the submission id was seen before and nothing was written.
    pub duplicate: bool,
    pub total_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCounts {
    #[serde(rename = "Green")]
    pub green: usize,
    #[serde(rename = "Yellow")]
    pub yellow: usize,
    #[serde(rename = "Trunk")]
    pub trunk: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub version: u32,
    pub rows: usize,
    pub counts: LabelCounts,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub version: u32,
    pub error: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown cloud '{0}'")]
    NotFound(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Invalid(_) => StatusCode::BAD_REQUEST,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = ErrorBody {
            version: API_VERSION,
            error: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

impl From<canopy::Error> for ApiError {
    fn from(e: canopy::Error) -> Self {
        if e.is_validation() {
            ApiError::Invalid(e.to_string())
        } else {
            ApiError::Internal(e.to_string())
        }
    }
}

type Shared = Arc<AppState>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn list_clouds(State(state): State<Shared>) -> Json<CloudList> {
    Json(CloudList {
        version: API_VERSION,
        clouds: state
            .registry
            .ids()
            .map(|c| CloudSummary {
                id: c.id.clone(),
                tree_id: c.tree_id.clone(),
                week: c.week,
            })
            .collect(),
    })
}

fn load(state: &AppState, id: &str) -> Result<Arc<LoadedCloud>, ApiError> {
    state.registry.load(id)?.ok_or_else(|| ApiError::NotFound(id.to_string()))
}

pub fn cloud_payload(state: &AppState, id: &str) -> Result<CloudPayload, ApiError> {
    let loaded = load(state, id)?;
    let stride = state.config.display_stride.max(1);
    let shown = loaded.cloud.points.iter().step_by(stride);
    Ok(CloudPayload {
        version: API_VERSION,
        id: id.to_string(),
        n_points: loaded.cloud.len(),
        stride,
        positions: shown.clone().map(|p| [p.x, p.y, p.z]).collect(),
        colors: shown.map(|p| p.rgb()).collect(),
    })
}

async fn get_cloud(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<CloudPayload>, ApiError> {
    blocking(move || cloud_payload(&state, &id)).await.map(Json)
}

/// Validates the whole submission, computes the feature rows and appends
/// them in one atomic write.
pub fn submit(state: &AppState, sub: &LabelSubmission) -> Result<SubmitResponse, ApiError> {
    if sub.version != API_VERSION {
        return Err(ApiError::Invalid(format!("unsupported version {}", sub.version)));
    }
    if sub.labels.is_empty() {
        return Err(ApiError::Invalid("submission has no labels".into()));
    }
    if let Some(id) = &sub.submission_id {
        let store = state.store.lock().unwrap();
        if store.previous(id).is_some() {
            return Ok(SubmitResponse {
                version: API_VERSION,
                appended: 0,
                duplicate: true,
                total_rows: store.dataset().rows.len(),
            });
        }
    }
    let loaded = load(state, &sub.cloud_id)?;
    let n = loaded.cloud.len();
    let mut seen = HashSet::new();
    for e in &sub.labels {
        if e.point_index >= n {
            return Err(ApiError::Invalid(format!(
                "point_index {} out of range for cloud '{}' with {n} points",
                e.point_index, sub.cloud_id
            )));
        }
        if !seen.insert(e.point_index) {
            return Err(ApiError::Invalid(format!("duplicate point_index {}", e.point_index)));
        }
    }
    let rows = sub
        .labels
        .iter()
        .map(|e| record_for_point(&loaded.cloud, &loaded.index, e.point_index, e.label, state.config.k_neighbors))
        .collect::<CoreResult<Vec<_>>>()?;

    let mut store = state.store.lock().unwrap();
    // Re-check under the writer lock so concurrent retries append once.
    if let Some(id) = &sub.submission_id {
        if store.previous(id).is_some() {
            return Ok(SubmitResponse {
                version: API_VERSION,
                appended: 0,
                duplicate: true,
                total_rows: store.dataset().rows.len(),
            });
        }
    }
    let appended = store.append(rows, sub.submission_id.as_deref())?;
    log::info!(
        "appended {appended} rows from cloud {} (annotator '{}')",
        sub.cloud_id,
        sub.annotator
    );
    Ok(SubmitResponse {
        version: API_VERSION,
        appended,
        duplicate: false,
        total_rows: store.dataset().rows.len(),
    })
}

async fn post_labels(State(state): State<Shared>, Json(sub): Json<LabelSubmission>) -> Result<Json<SubmitResponse>, ApiError> {
    blocking(move || submit(&state, &sub)).await.map(Json)
}

pub fn dataset_stats(state: &AppState) -> DatasetStats {
    let store = state.store.lock().unwrap();
    let ds = store.dataset();
    DatasetStats {
        version: API_VERSION,
        rows: ds.rows.len(),
        counts: LabelCounts {
            green: ds.count(Label::Green),
            yellow: ds.count(Label::Yellow),
            trunk: ds.count(Label::Trunk),
        },
        columns: LABEL_DATASET_HEADER.iter().map(|s| s.to_string()).collect(),
    }
}

async fn get_stats(State(state): State<Shared>) -> Json<DatasetStats> {
    Json(dataset_stats(&state))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/clouds", get(list_clouds))
        .route("/clouds/{id}", get(get_cloud))
        .route("/labels", post(post_labels))
        .route("/dataset/stats", get(get_stats))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("label service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

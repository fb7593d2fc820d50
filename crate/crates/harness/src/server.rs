//! HTTP session service. Each session owns an optimizer behind its own lock,
//! so commands on one session are serialized while sessions run in parallel.
//!
//! ```text
//! POST   /sessions               {image, scheme, params, init} -> {id, rows, cols}
//! GET    /sessions/{id}          -> state
//! GET    /sessions/{id}/trace    -> [trace line]
//! POST   /sessions/{id}/step     {n} -> state
//! PATCH  /sessions/{id}/points   {index, row, col} -> state
//! POST   /sessions/{id}/alpha    {mode} -> state
//! DELETE /sessions/{id}
//! ```

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, PathRejection};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use subsnake_core::{OptimizerConfig, Point, Polarity, RegionBox, SnakeOptimizer, Status};

use crate::error::{HarnessError, Result};
use crate::formats::{self, circle_polygon, parse_alpha, parse_scheme, PointRole, PolygonFile, TraceLine};
use crate::io::{decode_gray, load_gray};
use crate::setup::{Setup, TableCache};

/// Most optimizer steps one request may ask for.
pub const MAX_STEPS_PER_REQUEST: usize = 10_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ImageSource {
    /// Encoded image file (PNG, JPEG, ...), base64.
    Base64(String),
    /// File on the server's disk.
    Path(PathBuf),
}

/// Exactly one of `points` and `circle`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitBody {
    /// `[[row, col], ...]`.
    pub points: Option<Vec<[f64; 2]>>,
    /// How `points` are used; targets by default.
    pub role: PointRole,
    /// `[row, col, radius, count]`.
    pub circle: Option<[f64; 4]>,
}

/// Optional overrides of the defaults shared with the CLI.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsBody {
    pub alpha: Option<String>,
    pub depth: Option<u32>,
    /// `[r0, r1, c0, c1]`, inclusive.
    #[serde(rename = "box")]
    pub region: Option<[usize; 4]>,
    /// `dark` or `bright`.
    pub polarity: Option<String>,
    pub filter_halfwidth: Option<usize>,
    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub step_tol: Option<f64>,
    pub stabilization_window: Option<usize>,
    pub memory: Option<usize>,
    pub max_step: Option<f64>,
}

impl ParamsBody {
    pub fn setup(&self) -> Result<Setup> {
        let d = OptimizerConfig::default();
        let config = OptimizerConfig {
            schedule: self.alpha.as_deref().map(parse_alpha).transpose()?.unwrap_or(d.schedule),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            grad_tol: self.grad_tol.unwrap_or(d.grad_tol),
            step_tol: self.step_tol.unwrap_or(d.step_tol),
            stabilization_window: self.stabilization_window.unwrap_or(d.stabilization_window),
            memory: self.memory.unwrap_or(d.memory),
            max_step: self.max_step.unwrap_or(d.max_step),
        };
        let polarity = match self.polarity.as_deref() {
            None | Some("dark") => Polarity::DarkObject,
            Some("bright") => Polarity::BrightObject,
            Some(p) => return Err(HarnessError::invalid(format!("polarity must be dark or bright, got {p:?}"))),
        };
        let region = self.region.map(|[r0, r1, c0, c1]| RegionBox::new(r0, r1, c0, c1)).transpose()?;
        Ok(Setup {
            depth: self.depth.unwrap_or(Setup::default().depth),
            region,
            polarity,
            filter_halfwidth: self.filter_halfwidth,
            config,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub image: ImageSource,
    pub scheme: String,
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default)]
    pub params: ParamsBody,
    pub init: InitBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateResponse {
    pub id: u64,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energies {
    pub total: f64,
    pub e_grad: f64,
    pub e_reg: f64,
    pub grad_norm: f64,
}

/// Snapshot of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: u64,
    pub scheme: String,
    pub rows: usize,
    pub cols: usize,
    /// Control points, `[row, col]`.
    pub polygon: Vec<[f64; 2]>,
    /// Curve samples at the table depth.
    pub curve: Vec<[f64; 2]>,
    pub depth: u32,
    pub energies: Energies,
    pub alpha: String,
    pub alpha_value: f64,
    pub phase: usize,
    pub status: String,
    pub iterations: usize,
    pub memory_len: usize,
    pub trace_len: usize,
    /// `[edge, row, col, sign]`.
    pub boundary: Vec<[i64; 4]>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRequest {
    #[serde(default = "one")]
    pub n: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovePoint {
    pub index: usize,
    pub row: f64,
    pub col: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaRequest {
    pub mode: String,
}

struct Session {
    id: u64,
    optimizer: SnakeOptimizer,
}

impl Session {
    fn state(&self) -> Result<SessionState> {
        let opt = &self.optimizer;
        let model = opt.model();
        let sample = model.sample(opt.polygon().vertices());
        let raster = model.raster(&sample)?;
        let current = opt.current();
        Ok(SessionState {
            id: self.id,
            scheme: formats::scheme_name(opt.polygon().scheme()).to_owned(),
            rows: model.image().rows(),
            cols: model.image().cols(),
            polygon: opt.polygon().vertices().iter().map(|p| [p.x, p.y]).collect(),
            curve: sample.points.iter().map(|p| [p.x, p.y]).collect(),
            depth: sample.depth,
            energies: Energies { total: current.value, e_grad: current.e_grad, e_reg: current.e_reg, grad_norm: current.grad_norm() },
            alpha: formats::alpha_string(opt.config().schedule),
            alpha_value: opt.alpha(),
            phase: opt.phase(),
            status: formats::status_name(opt.status()).to_owned(),
            iterations: opt.iterations(),
            memory_len: opt.memory_len(),
            trace_len: opt.records().len(),
            boundary: raster.pixels().iter().map(|p| [p.edge as i64, p.row as i64, p.col as i64, p.sign as i64]).collect(),
        })
    }
}

/// Shared service state.
#[derive(Default)]
pub struct AppState {
    sessions: Mutex<HashMap<u64, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
    cache: TableCache,
}

impl AppState {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn cache(&self) -> &TableCache {
        &self.cache
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    fn session(&self, id: u64) -> std::result::Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).get(&id).cloned().ok_or(ApiError::NotFound(id))
    }
}

pub enum ApiError {
    NotFound(u64),
    Bad(HarnessError),
    Internal(String),
}

impl From<HarnessError> for ApiError {
    fn from(e: HarnessError) -> Self {
        ApiError::Bad(e)
    }
}

impl From<subsnake_core::Error> for ApiError {
    fn from(e: subsnake_core::Error) -> Self {
        ApiError::Bad(e.into())
    }
}

// Malformed bodies and ids get the same JSON error shape as other bad requests.
impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::Bad(HarnessError::invalid(e.body_text()))
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        ApiError::Bad(HarnessError::invalid(e.body_text()))
    }
}

type JsonBody<T> = std::result::Result<Json<T>, JsonRejection>;
type Id = std::result::Result<Path<u64>, PathRejection>;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (code, msg) = match self {
            ApiError::NotFound(id) => (StatusCode::NOT_FOUND, format!("no session {id}")),
            ApiError::Bad(e) => (StatusCode::BAD_REQUEST, e.to_string()),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (code, Json(serde_json::json!({ "error": msg }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(read).delete(remove))
        .route("/sessions/{id}/trace", get(trace))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/points", axum::routing::patch(move_point))
        .route("/sessions/{id}/alpha", post(set_alpha))
        .with_state(state)
}

/// Runs `f` on the session off the async workers; optimizer work is CPU bound.
async fn with_session<T: Send + 'static>(
    state: &AppState,
    id: u64,
    f: impl FnOnce(&mut Session) -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    let session = state.session(id)?;
    tokio::task::spawn_blocking(move || {
        let mut guard = session.lock().unwrap_or_else(|e| e.into_inner());
        f(&mut guard)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
}

pub fn create_session(state: &AppState, req: CreateRequest) -> Result<CreateResponse> {
    let image = match &req.image {
        ImageSource::Base64(data) => {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(data.trim())
                .map_err(|e| HarnessError::invalid(format!("image is not base64: {e}")))?;
            decode_gray(&bytes)?
        }
        ImageSource::Path(p) => load_gray(p)?,
    };
    let scheme = parse_scheme(&req.scheme, req.omega)?;
    let init = match (&req.init.points, &req.init.circle) {
        (Some(points), None) => PolygonFile {
            scheme: req.scheme.clone(),
            omega: req.omega,
            role: req.init.role,
            points: points.clone(),
        }
        .to_control()?,
        (None, Some([r, c, radius, count])) => {
            if *count < 0.0 || count.fract() != 0.0 {
                return Err(HarnessError::invalid("circle count must be a whole number"));
            }
            circle_polygon(scheme, Point::new(*r, *c), *radius, *count as usize)?
        }
        _ => return Err(HarnessError::invalid("init needs exactly one of points and circle")),
    };
    let optimizer = req.params.setup()?.start(&image, &init, &state.cache)?;
    let id = state.next_id.fetch_add(1, Ordering::Relaxed) + 1;
    let session = Session { id, optimizer };
    state.sessions.lock().unwrap_or_else(|e| e.into_inner()).insert(id, Arc::new(Mutex::new(session)));
    Ok(CreateResponse { id, rows: image.rows(), cols: image.cols() })
}

async fn create(State(state): State<Arc<AppState>>, body: JsonBody<CreateRequest>) -> ApiResult<(StatusCode, Json<CreateResponse>)> {
    let Json(req) = body?;
    let st = state.clone();
    let out = tokio::task::spawn_blocking(move || create_session(&st, req))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(out)))
}

async fn read(State(state): State<Arc<AppState>>, id: Id) -> ApiResult<Json<SessionState>> {
    let Path(id) = id?;
    Ok(Json(with_session(&state, id, |s| Ok(s.state()?)).await?))
}

async fn trace(State(state): State<Arc<AppState>>, id: Id) -> ApiResult<Json<Vec<TraceLine>>> {
    let Path(id) = id?;
    let lines = with_session(&state, id, |s| Ok(s.optimizer.records().iter().map(TraceLine::from).collect())).await?;
    Ok(Json(lines))
}

async fn step(
    State(state): State<Arc<AppState>>,
    id: Id,
    body: JsonBody<StepRequest>,
) -> ApiResult<Json<SessionState>> {
    let (Path(id), Json(req)) = (id?, body?);
    if req.n > MAX_STEPS_PER_REQUEST {
        return Err(HarnessError::invalid(format!("at most {MAX_STEPS_PER_REQUEST} steps per request")).into());
    }
    let out = with_session(&state, id, move |s| {
        for _ in 0..req.n {
            if s.optimizer.step() != Status::Running {
                break;
            }
        }
        Ok(s.state()?)
    })
    .await?;
    Ok(Json(out))
}

async fn move_point(
    State(state): State<Arc<AppState>>,
    id: Id,
    body: JsonBody<MovePoint>,
) -> ApiResult<Json<SessionState>> {
    let (Path(id), Json(req)) = (id?, body?);
    let out = with_session(&state, id, move |s| {
        s.optimizer.move_point(req.index, Point::new(req.row, req.col))?;
        Ok(s.state()?)
    })
    .await?;
    Ok(Json(out))
}

async fn set_alpha(
    State(state): State<Arc<AppState>>,
    id: Id,
    body: JsonBody<AlphaRequest>,
) -> ApiResult<Json<SessionState>> {
    let (Path(id), Json(req)) = (id?, body?);
    let schedule = parse_alpha(&req.mode)?;
    let out = with_session(&state, id, move |s| {
        s.optimizer.set_schedule(schedule)?;
        Ok(s.state()?)
    })
    .await?;
    Ok(Json(out))
}

async fn remove(State(state): State<Arc<AppState>>, id: Id) -> ApiResult<StatusCode> {
    let Path(id) = id?;
    match state.sessions.lock().unwrap_or_else(|e| e.into_inner()).remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::NotFound(id)),
    }
}

/// Binds `addr` and serves until the process is stopped.
pub fn serve_blocking(addr: &str) -> Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| HarnessError::io("<runtime>", e))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| HarnessError::io(addr, e))?;
        eprintln!("listening on {}", listener.local_addr().map_err(|e| HarnessError::io(addr, e))?);
        axum::serve(listener, router(AppState::new())).await.map_err(|e| HarnessError::io(addr, e))
    })
}

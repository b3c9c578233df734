use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};
use tower_http::services::ServeDir;
use vibroaffect::affect::{AffectEstimator, Backend, EstimateError};
use vibroaffect::session::{plan_session, SessionLog, SessionView};
use vibroaffect::synth::{AudioDevice, DeviceError, StartSignal};
use vibroaffect::{summarize, Config, Pipeline, PipelineError, PhraseSet, Session, SessionError, SpeakResponse};

const OPERATOR_PAGE: &str = include_str!("operator.html");

/// JSON error body: `{"error": <class>, "message": ..., "cause"?: ...}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    class: &'static str,
    message: String,
    cause: Option<&'static str>,
}

impl ApiError {
    fn new(status: StatusCode, class: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            class,
            message: message.into(),
            cause: None,
        }
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not-found", what)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.class, "message": self.message});
        if let Some(cause) = self.cause {
            body["cause"] = cause.into();
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "input", r.body_text())
    }
}

impl From<EstimateError> for ApiError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Input(m) => ApiError::new(StatusCode::BAD_REQUEST, "input", m),
            EstimateError::Config(_) => ApiError {
                cause: Some("config"),
                ..ApiError::new(StatusCode::BAD_GATEWAY, "estimator", e.to_string())
            },
            EstimateError::Exhausted { cause, .. } => ApiError {
                cause: Some(match cause {
                    vibroaffect::affect::FailureCause::Transport => "transport",
                    vibroaffect::affect::FailureCause::Parse => "parse",
                }),
                ..ApiError::new(StatusCode::BAD_GATEWAY, "estimator", e.to_string())
            },
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Input(m) => ApiError::new(StatusCode::BAD_REQUEST, "input", m),
            PipelineError::Estimate(e) => e.into(),
            PipelineError::Device(e) => e.into(),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "render", other.to_string()),
        }
    }
}

impl From<DeviceError> for ApiError {
    fn from(e: DeviceError) -> Self {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "device", e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, class) = match &e {
            SessionError::State { .. } => (StatusCode::CONFLICT, "state"),
            SessionError::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            SessionError::Config(_) => (StatusCode::BAD_REQUEST, "config"),
            SessionError::Log(_) => (StatusCode::INTERNAL_SERVER_ERROR, "log"),
        };
        ApiError::new(status, class, e.to_string())
    }
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
}

struct PendingPlayback {
    signal: StartSignal,
    created: Instant,
}

struct Inner {
    config: Config,
    backend: Backend,
    estimators: Mutex<HashMap<Backend, Arc<dyn AffectEstimator>>>,
    device: Option<Arc<AudioDevice>>,
    expiry: Duration,
    playbacks: Mutex<HashMap<String, PendingPlayback>>,
    phrases: PhraseSet,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    log: Option<Arc<SessionLog>>,
}

/// Shared service state. Cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

pub struct AppStateBuilder {
    config: Config,
    backend: Option<Backend>,
    estimators: HashMap<Backend, Arc<dyn AffectEstimator>>,
    device: Option<Arc<AudioDevice>>,
    phrases: PhraseSet,
    log: Option<Arc<SessionLog>>,
}

impl AppStateBuilder {
    /// Uses `estimator` for `backend` instead of building one from config.
    pub fn estimator(mut self, backend: Backend, estimator: Arc<dyn AffectEstimator>) -> Self {
        self.estimators.insert(backend, estimator);
        self
    }

    /// Backend used when a request does not name one.
    pub fn default_backend(mut self, backend: Backend) -> Self {
        self.backend = Some(backend);
        self
    }

    pub fn device(mut self, device: Arc<AudioDevice>) -> Self {
        self.device = Some(device);
        self
    }

    pub fn phrases(mut self, phrases: PhraseSet) -> Self {
        self.phrases = phrases;
        self
    }

    pub fn log(mut self, log: Arc<SessionLog>) -> Self {
        self.log = Some(log);
        self
    }

    pub fn build(self) -> AppState {
        AppState(Arc::new(Inner {
            backend: self.backend.unwrap_or(self.config.estimator.backend),
            expiry: Duration::from_secs(self.config.server.playback_expiry_s),
            config: self.config,
            estimators: Mutex::new(self.estimators),
            device: self.device,
            playbacks: Mutex::new(HashMap::new()),
            phrases: self.phrases,
            sessions: Mutex::new(HashMap::new()),
            log: self.log,
        }))
    }
}

impl AppState {
    pub fn builder(config: Config) -> AppStateBuilder {
        AppStateBuilder {
            config,
            backend: None,
            estimators: HashMap::new(),
            device: None,
            phrases: PhraseSet::shipped(),
            log: None,
        }
    }

    /// Opens the configured audio device; `none` leaves the service without
    /// one, so playback requests get 503.
    pub fn from_config(config: Config) -> Result<AppStateBuilder, DeviceError> {
        let device = match AudioDevice::from_name(&config.audio.device) {
            Ok(d) => Some(Arc::new(d)),
            Err(DeviceError::Unavailable(_)) if matches!(config.audio.device.trim(), "" | "none") => None,
            Err(e) => return Err(e),
        };
        let mut builder = Self::builder(config);
        builder.device = device;
        Ok(builder)
    }

    fn estimator(&self, backend: Backend) -> Result<Arc<dyn AffectEstimator>, EstimateError> {
        if let Some(e) = self.0.estimators.lock().unwrap().get(&backend) {
            return Ok(e.clone());
        }
        let built: Arc<dyn AffectEstimator> = Arc::new(self.0.config.estimator(Some(backend))?);
        self.0.estimators.lock().unwrap().insert(backend, built.clone());
        Ok(built)
    }

    fn pipeline(&self, backend: Backend) -> Result<Pipeline, EstimateError> {
        let mut p = Pipeline::new(self.estimator(backend)?)
            .with_sample_rate(self.0.config.audio.sample_rate)
            .with_envelope(self.0.config.audio.envelope);
        if let Some(d) = &self.0.device {
            p = p.with_device(d.clone());
        }
        Ok(p)
    }

    fn register_playback(&self, signal: StartSignal) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let mut playbacks = self.0.playbacks.lock().unwrap();
        playbacks.retain(|_, p| p.created.elapsed() < self.0.expiry);
        playbacks.insert(
            id.clone(),
            PendingPlayback {
                signal,
                created: Instant::now(),
            },
        );
        id
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.0
            .sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))
    }

    /// Creates the session for one participant and returns its id.
    pub fn create_session(&self, participant_index: u32, seed: u64) -> Result<String, SessionError> {
        let plan = plan_session(participant_index, &self.0.phrases, seed)?;
        let id = plan.participant_id.clone();
        let mut sessions = self.0.sessions.lock().unwrap();
        if sessions.contains_key(&id) {
            return Err(SessionError::State {
                expected: "no session".into(),
                actual: format!("`{id}` already created"),
            });
        }
        let session = Session::new(plan, self.0.phrases.clone(), self.0.log.clone())?;
        sessions.insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }
}

pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let router = Router::new()
        .route("/health", get(health))
        .route("/speak", post(speak))
        .route("/speak/{id}/start", post(start))
        .route("/session", post(create_session))
        .route("/session/{id}/state", get(session_state))
        .route("/session/{id}/advance", post(advance))
        .route("/session/{id}/sam", post(submit_sam))
        .route("/session/{id}/ios", post(submit_ios))
        .route("/session/{id}/summary", get(session_summary))
        .with_state(state);
    match ui_dir {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router.route("/", get(|| async { Html(OPERATOR_PAGE) })),
    }
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "estimator": state.0.backend,
        "device": state.0.device.as_ref().map(|d| d.name().to_string()),
        "sample_rate": state.0.config.audio.sample_rate,
    }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    Play,
    #[default]
    Wav,
    Both,
}

#[derive(Debug, Deserialize)]
pub struct SpeakRequest {
    pub text: String,
    #[serde(default)]
    pub estimator: Option<Backend>,
    #[serde(default)]
    pub render: RenderMode,
}

async fn speak(
    State(state): State<AppState>,
    body: Result<Json<SpeakRequest>, JsonRejection>,
) -> Result<Json<SpeakResponse>, ApiError> {
    let Json(req) = body?;
    if req.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "input", "text is empty"));
    }
    let play = req.render != RenderMode::Wav;
    if play && state.0.device.is_none() {
        return Err(DeviceError::Unavailable("no audio device configured".into()).into());
    }
    let backend = req.estimator.unwrap_or(state.0.backend);
    tokio::task::spawn_blocking(move || {
        let pipeline = state.pipeline(backend)?;
        let rendered = pipeline.render(&req.text)?;
        let playback_id = if play {
            let signal = StartSignal::new();
            // the handle is dropped; the device worker owns the playback
            pipeline.enqueue(&rendered, signal.clone())?;
            Some(state.register_playback(signal))
        } else {
            None
        };
        Ok(Json(SpeakResponse::new(&rendered, req.render != RenderMode::Play, playback_id)))
    })
    .await
    .map_err(join_error)?
}

async fn start(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    let playbacks = state.0.playbacks.lock().unwrap();
    match playbacks.get(&id) {
        Some(p) if p.created.elapsed() < state.0.expiry => {
            p.signal.fire();
            Ok(StatusCode::NO_CONTENT)
        }
        _ => Err(ApiError::not_found(format!("no queued playback `{id}`"))),
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub participant_index: u32,
    #[serde(default)]
    pub seed: u64,
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(req) = body?;
    let id = state.create_session(req.participant_index, req.seed)?;
    let view = state.session(&id)?.lock().unwrap().view();
    Ok((StatusCode::CREATED, Json(view)))
}

async fn session_state(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(state.session(&id)?.lock().unwrap().view()))
}

#[derive(Debug, Serialize)]
struct Step<T> {
    record: T,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    duplicate: bool,
    state: SessionView,
}

async fn advance(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Step<vibroaffect::TrialRecord>>, ApiError> {
    let session = state.session(&id)?;
    let backend = state.0.backend;
    tokio::task::spawn_blocking(move || {
        let pipeline = state.pipeline(backend);
        let mut s = session.lock().unwrap();
        let record = match &pipeline {
            Ok(p) => s.advance(p)?,
            // an unusable estimator skips vibration trials like any other
            // stimulus failure
            Err(e) => s.advance(&FailingPipeline(e.clone()))?,
        };
        Ok(Json(Step {
            record,
            duplicate: false,
            state: s.view(),
        }))
    })
    .await
    .map_err(join_error)?
}

struct FailingPipeline(EstimateError);

impl vibroaffect::session::TrialPipeline for FailingPipeline {
    fn present(&self, _text: &str) -> Result<vibroaffect::VibrationParams, PipelineError> {
        Err(PipelineError::Estimate(self.0.clone()))
    }
}

#[derive(Debug, Deserialize)]
pub struct SamRequest {
    pub valence: u8,
    pub arousal: u8,
    #[serde(default)]
    pub nonce: Option<String>,
}

async fn submit_sam(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<SamRequest>, JsonRejection>,
) -> Result<Json<Step<vibroaffect::TrialRecord>>, ApiError> {
    let Json(req) = body?;
    let session = state.session(&id)?;
    let mut s = session.lock().unwrap();
    let sub = s.submit_sam(req.valence, req.arousal, req.nonce.as_deref())?;
    Ok(Json(Step {
        record: sub.record,
        duplicate: sub.duplicate,
        state: s.view(),
    }))
}

#[derive(Debug, Deserialize)]
pub struct IosRequest {
    pub ios: u8,
    #[serde(default)]
    pub nonce: Option<String>,
}

async fn submit_ios(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<IosRequest>, JsonRejection>,
) -> Result<Json<Step<vibroaffect::IosRecord>>, ApiError> {
    let Json(req) = body?;
    let session = state.session(&id)?;
    let mut s = session.lock().unwrap();
    let sub = s.submit_ios(req.ios, req.nonce.as_deref())?;
    Ok(Json(Step {
        record: sub.record,
        duplicate: sub.duplicate,
        state: s.view(),
    }))
}

async fn session_summary(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<vibroaffect::SummaryReport>, ApiError> {
    let session = state.session(&id)?;
    let s = session.lock().unwrap();
    Ok(Json(summarize(s.trials(), s.ios_records())))
}

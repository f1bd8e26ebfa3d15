//! HTTP front end for talking to trained agents.
//!
//! | Method | Path | Body / result |
//! |---|---|---|
//! | POST | `/sessions` | `{"reservoir_id", "agent_seed"?}` → `{"id", "reservoir_id", "agent_seed"?, "created_at"}` |
//! | POST | `/sessions/{id}/messages` | `{"prompt"}` → one turn |
//! | GET | `/sessions/{id}` | the session with all turns |
//! | GET | `/agents` | every checkpoint under the runs directory |
//! | GET | `/metrics/{reservoir}/{env}/{seed}` | the run's `metrics.csv`, verbatim |
//! | GET | `/envs` | environment descriptors and the tone threshold |
//! | GET | `/health` | liveness |
//!
//! Response shapes are published in `schemas/api.schema.json`.

mod agents;
mod error;
mod store;

pub use agents::{scan_agents, AgentRecord, AgentStatus};
pub use error::{ApiError, ErrorBody};
pub use store::{round_seed, Session, SessionHeader, SessionStore, SessionView, StoreError, StoredTurn};

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use langgame_core::dialogue::{run_round, AgentSet, HttpLlm, LlmClient, MockLlm};
use langgame_core::envs::{env_descriptors, EnvDescriptor};
use langgame_core::reservoir::Registry;
use langgame_core::trainer::{run_dir, METRICS_FILE};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_CORS_ORIGIN: &str = "http://localhost:5173";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LlmProvider {
    Mock,
    Http,
}

/// Runtime settings, normally read from `LANGGAME_*` environment variables.
#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub data_dir: PathBuf,
    pub runs_dir: PathBuf,
    /// Extra reservoir model files loaded on top of the built-in registry.
    pub models_dir: Option<PathBuf>,
    /// `*` allows any origin.
    pub cors_origin: String,
    pub llm: LlmProvider,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            data_dir: "data".into(),
            runs_dir: "runs".into(),
            models_dir: None,
            cors_origin: DEFAULT_CORS_ORIGIN.into(),
            llm: LlmProvider::Mock,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceConfig {
    /// Reads `LANGGAME_HOST`, `LANGGAME_PORT`, `LANGGAME_DATA_DIR`,
    /// `LANGGAME_RUNS_DIR`, `LANGGAME_MODELS_DIR`, `LANGGAME_CORS_ORIGIN` and
    /// `LANGGAME_LLM` (`mock` or `http`), falling back to the defaults.
    pub fn from_env() -> Result<Self, ServiceError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let mut c = ServiceConfig::default();
        if let Some(v) = var("LANGGAME_HOST") {
            c.host = v;
        }
        if let Some(v) = var("LANGGAME_PORT") {
            c.port = v.parse().map_err(|_| ServiceError::Config(format!("LANGGAME_PORT={v} is not a port")))?;
        }
        if let Some(v) = var("LANGGAME_DATA_DIR") {
            c.data_dir = v.into();
        }
        if let Some(v) = var("LANGGAME_RUNS_DIR") {
            c.runs_dir = v.into();
        }
        c.models_dir = var("LANGGAME_MODELS_DIR").map(PathBuf::from);
        if let Some(v) = var("LANGGAME_CORS_ORIGIN") {
            c.cors_origin = v;
        }
        if let Some(v) = var("LANGGAME_LLM") {
            c.llm = match v.as_str() {
                "mock" => LlmProvider::Mock,
                "http" => LlmProvider::Http,
                other => return Err(ServiceError::Config(format!("LANGGAME_LLM={other}; expected mock or http"))),
            };
        }
        Ok(c)
    }

    pub fn registry(&self) -> Result<Registry, ServiceError> {
        let mut registry = Registry::desk();
        if let Some(dir) = &self.models_dir {
            registry.load_dir(dir).map_err(|e| ServiceError::Config(e.to_string()))?;
        }
        Ok(registry)
    }

    pub fn llm(&self) -> Result<Arc<dyn LlmClient>, ServiceError> {
        Ok(match self.llm {
            LlmProvider::Mock => Arc::new(MockLlm::default()),
            LlmProvider::Http => Arc::new(HttpLlm::from_env().map_err(|e| ServiceError::Config(e.to_string()))?),
        })
    }
}

pub struct AppState {
    pub registry: Arc<Registry>,
    pub runs_dir: PathBuf,
    pub sessions: SessionStore,
    pub llm: Arc<dyn LlmClient>,
    pub tone_threshold: f64,
}

impl AppState {
    pub fn new(registry: Registry, runs_dir: &Path, data_dir: &Path, llm: Arc<dyn LlmClient>) -> Result<Self, ServiceError> {
        Ok(AppState {
            registry: Arc::new(registry),
            runs_dir: runs_dir.to_path_buf(),
            sessions: SessionStore::open(data_dir)?,
            llm,
            tone_threshold: MockLlm::default().tone_threshold,
        })
    }
}

pub fn cors_layer(origin: &str) -> CorsLayer {
    let allow = if origin == "*" {
        AllowOrigin::any()
    } else {
        match HeaderValue::from_str(origin) {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => AllowOrigin::list(Vec::<HeaderValue>::new()),
        }
    };
    CorsLayer::new().allow_origin(allow).allow_methods([Method::GET, Method::POST]).allow_headers([header::CONTENT_TYPE])
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/agents", get(list_agents))
        .route("/metrics/{reservoir}/{env}/{seed}", get(get_metrics))
        .route("/envs", get(list_envs))
        .fallback(|| async { ApiError::not_found("route", "") })
        .with_state(state)
}

/// Binds and serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = AppState::new(config.registry()?, &config.runs_dir, &config.data_dir, config.llm()?)?;
    log::info!("{} session(s) reloaded from {}", state.sessions.len(), config.data_dir.display());
    let app = router(Arc::new(state)).layer(cors_layer(&config.cors_origin));
    let addr: SocketAddr = format!("{}:{}", config.host, config.port)
        .parse()
        .map_err(|_| ServiceError::Config(format!("bad bind address {}:{}", config.host, config.port)))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(config: ServiceConfig) -> Result<(), ServiceError> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(serve(config))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

#[derive(Deserialize)]
struct CreateSession {
    reservoir_id: String,
    #[serde(default)]
    agent_seed: Option<u64>,
}

#[derive(Serialize)]
struct SessionCreated {
    id: String,
    reservoir_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    agent_seed: Option<u64>,
    created_at: chrono::DateTime<chrono::Utc>,
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<SessionCreated>, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let (id, seed) = (req.reservoir_id.clone(), req.agent_seed);
    let st = state.clone();
    let (known, seeded) = blocking(move || {
        let usable: Vec<AgentRecord> = scan_agents(&st.runs_dir, &st.registry)
            .0
            .into_iter()
            .filter(|r| r.status == AgentStatus::Ok && r.reservoir_id.as_deref() == Some(&id))
            .collect();
        let known = st.registry.contains(&id) && !usable.is_empty();
        (known, seed.is_none_or(|k| usable.iter().any(|r| r.seed == Some(k))))
    })
    .await?;
    if !known {
        return Err(ApiError::not_found("reservoir", &req.reservoir_id));
    }
    if !seeded {
        let what = format!("{}/seed_{}", req.reservoir_id, req.agent_seed.unwrap_or_default());
        return Err(ApiError::not_found("agent", &what));
    }
    let session = state.sessions.create(&req.reservoir_id, req.agent_seed).map_err(|e| ApiError::internal(e.to_string()))?;
    let h = &session.header;
    Ok(Json(SessionCreated { id: h.id.clone(), reservoir_id: h.reservoir_id.clone(), agent_seed: h.agent_seed, created_at: h.created_at }))
}

async fn get_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    let session = state.sessions.get(&id).ok_or_else(|| ApiError::not_found("session", &id))?;
    Ok(Json(session.view()))
}

#[derive(Deserialize)]
struct PostMessage {
    prompt: String,
}

async fn post_message(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Json<StoredTurn>, ApiError> {
    let session = state.sessions.get(&id).ok_or_else(|| ApiError::not_found("session", &id))?;
    let req: PostMessage = parse_body(&body)?;
    if req.prompt.trim().is_empty() {
        return Err(ApiError::bad_request("prompt is empty"));
    }
    let _guard = session.writer.lock().await;
    let index = session.snapshot().len();
    let seed = round_seed(&session.header.id, index);
    let st = state.clone();
    let s = session.clone();
    blocking(move || {
        let (_, loaded) = scan_agents(&st.runs_dir, &st.registry);
        let h = &s.header;
        let mine = loaded.into_iter().filter(|c| c.reservoir_id == h.reservoir_id && h.agent_seed.is_none_or(|k| c.seed == k));
        let agents = AgentSet::from_checkpoints(mine, &st.registry).map_err(ApiError::from_dialogue)?;
        let turn = run_round(&req.prompt, &agents, st.llm.as_ref(), seed).map_err(ApiError::from_dialogue)?;
        let stored = StoredTurn { index, turn };
        s.append(stored.clone()).map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(Json(stored))
    })
    .await?
}

#[derive(Serialize)]
struct AgentList {
    agents: Vec<AgentRecord>,
}

async fn list_agents(State(state): State<Arc<AppState>>) -> Result<Json<AgentList>, ApiError> {
    let agents = blocking(move || scan_agents(&state.runs_dir, &state.registry).0).await?;
    Ok(Json(AgentList { agents }))
}

fn plain_segment(s: &str) -> bool {
    !s.is_empty() && s != "." && s != ".." && !s.contains(['/', '\\'])
}

async fn get_metrics(
    State(state): State<Arc<AppState>>,
    UrlPath((reservoir, env, seed)): UrlPath<(String, String, String)>,
) -> Result<Response, ApiError> {
    let name = format!("{reservoir}/{env}/{seed}");
    let seed: u64 = seed.parse().map_err(|_| ApiError::bad_request(format!("seed '{seed}' is not an integer")))?;
    if !plain_segment(&reservoir) || !plain_segment(&env) {
        return Err(ApiError::not_found("run", &name));
    }
    let path = run_dir(&state.runs_dir, &reservoir, &env, seed).join(METRICS_FILE);
    let bytes = blocking(move || std::fs::read(path)).await?.map_err(|_| ApiError::not_found("run", &name))?;
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, "text/csv; charset=utf-8")], bytes).into_response())
}

#[derive(Serialize)]
struct EnvListing {
    tone_threshold: f64,
    envs: Vec<EnvDescriptor>,
}

async fn list_envs(State(state): State<Arc<AppState>>) -> Json<EnvListing> {
    Json(EnvListing { tone_threshold: state.tone_threshold, envs: env_descriptors() })
}

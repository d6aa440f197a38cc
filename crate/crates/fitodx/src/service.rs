//! JSON-over-HTTP diagnosis sessions.
//!
//! The session table lives in memory; the session log is the source of
//! truth. Every transition is appended to the log before its response is
//! sent, and any session missing from memory (evicted, or created before a
//! restart) is rebuilt from the log on demand.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tokio::sync::Mutex;

use fitodx_core::catalog::KbSummary;
use fitodx_core::engine::{Engine, EngineError, EngineState};
use fitodx_core::model::Diagnosis;
use fitodx_core::{Answer, Ident, KnowledgeBase, Outcome, QuestionId};

use crate::log::{replay, KbStamp, LineKind, LogError, LogLine, Replay, SessionLog};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_LOG_PATH: &str = "./sessions.jsonl";
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(24 * 60 * 60);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub log_path: PathBuf,
    pub image_dir: Option<PathBuf>,
    /// Idle time after which a session leaves memory. It stays in the log.
    pub session_ttl: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: DEFAULT_LISTEN.parse().expect("valid default address"),
            log_path: PathBuf::from(DEFAULT_LOG_PATH),
            image_dir: None,
            session_ttl: DEFAULT_SESSION_TTL,
        }
    }
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("not found")]
    NotFound,
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Conflict(String),
    #[error("knowledge base unavailable: {0}")]
    Unavailable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound => StatusCode::NOT_FOUND,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ApiError::NotFound => "not_found",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Unprocessable(_) => "unprocessable",
            ApiError::Conflict(_) => "conflict",
            ApiError::Unavailable(_) => "unavailable",
            ApiError::Internal(_) => "internal",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if let ApiError::Internal(msg) = &self {
            tracing::error!("{msg}");
        }
        let body = json!({ "error": { "code": self.code(), "message": self.to_string() } });
        (self.status(), Json(body)).into_response()
    }
}

impl From<LogError> for ApiError {
    fn from(e: LogError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

// ---- wire types ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingView {
    pub question_id: QuestionId,
    pub prompt: String,
    /// 1-based position of this question in the session.
    pub ordinal: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultStatus {
    Diagnosed,
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultView {
    pub status: ResultStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<Diagnosis>,
    pub module: Ident,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<Ident>,
}

impl From<&Outcome> for ResultView {
    fn from(outcome: &Outcome) -> Self {
        match outcome {
            Outcome::Diagnosed {
                module,
                rule,
                diagnosis,
            } => ResultView {
                status: ResultStatus::Diagnosed,
                diagnosis: Some(diagnosis.clone()),
                module: module.clone(),
                rule: Some(rule.clone()),
            },
            Outcome::NoMatch { last_module } => ResultView {
                status: ResultStatus::NoMatch,
                diagnosis: None,
                module: last_module.clone(),
                rule: None,
            },
        }
    }
}

/// Either the next question or the final result; exactly one is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepView {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending: Option<PendingView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ResultView>,
}

impl StepView {
    fn of(state: &EngineState) -> StepView {
        StepView {
            pending: pending_view(state),
            result: state.outcome().map(ResultView::from),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreatedView {
    pub session_id: String,
    #[serde(flatten)]
    pub step: StepView,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskedView {
    pub question_id: QuestionId,
    pub prompt: String,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub finished: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_note: Option<String>,
    pub asked: Vec<AskedView>,
    #[serde(flatten)]
    pub step: StepView,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    #[serde(default)]
    client_note: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerBody {
    question_id: String,
    answer: String,
}

fn pending_view(state: &EngineState) -> Option<PendingView> {
    let q = state.pending_question()?;
    Some(PendingView {
        question_id: q.id.clone(),
        prompt: q.text.clone(),
        ordinal: state.pending_ordinal()?,
    })
}

// ---- state ----

#[derive(Debug)]
struct Session {
    id: String,
    created_at: DateTime<Utc>,
    updated_at: DateTime<Utc>,
    client_note: Option<String>,
    state: EngineState,
    last_access: Instant,
}

impl Session {
    fn view(&self) -> SessionView {
        SessionView {
            session_id: self.id.clone(),
            created_at: self.created_at,
            updated_at: self.updated_at,
            finished: self.state.is_finished(),
            client_note: self.client_note.clone(),
            asked: self
                .state
                .asked()
                .map(|(q, prompt, answer)| AskedView {
                    question_id: q.clone(),
                    prompt: prompt.to_string(),
                    answer,
                })
                .collect(),
            step: StepView::of(&self.state),
        }
    }

    fn touch(&mut self, now: DateTime<Utc>) {
        // Keeps timestamps monotone even if the wall clock steps back.
        self.updated_at = self.updated_at.max(now);
        self.last_access = Instant::now();
    }
}

type SessionHandle = Arc<Mutex<Session>>;

#[derive(Debug)]
struct Loaded {
    engine: Engine,
    summary: KbSummary,
    stamp: KbStamp,
}

/// Shared service state. Cheap to clone.
#[derive(Debug, Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Debug)]
struct Inner {
    kb: Result<Loaded, String>,
    sessions: RwLock<HashMap<String, SessionHandle>>,
    log: SessionLog,
    image_dir: Option<PathBuf>,
    ttl: Duration,
}

impl AppState {
    /// Opens the log and restores every session it holds. Pass `Err` for a
    /// knowledge base that failed to load: the service then answers 503.
    pub fn new(kb: Result<KnowledgeBase, String>, config: &ServiceConfig) -> Result<(AppState, Replay), LogError> {
        let kb = kb.and_then(|kb| {
            Engine::new(kb)
                .map(|engine| Loaded {
                    summary: KbSummary::of(engine.kb()),
                    stamp: KbStamp::of(engine.kb()),
                    engine,
                })
                .map_err(|e| e.to_string())
        });
        let log = SessionLog::open(&config.log_path)?;
        let restored = match &kb {
            Ok(loaded) => replay(log.path(), &loaded.engine, None)?,
            Err(_) => Replay::default(),
        };
        let sessions = restored
            .sessions
            .iter()
            .map(|s| {
                let session = Session {
                    id: s.session_id.clone(),
                    created_at: s.created_at,
                    updated_at: s.updated_at,
                    client_note: s.client_note.clone(),
                    state: s.state.clone(),
                    last_access: Instant::now(),
                };
                (s.session_id.clone(), Arc::new(Mutex::new(session)))
            })
            .collect();
        let state = AppState {
            inner: Arc::new(Inner {
                kb,
                sessions: RwLock::new(sessions),
                log,
                image_dir: config.image_dir.clone(),
                ttl: config.session_ttl,
            }),
        };
        Ok((state, restored))
    }

    fn loaded(&self) -> Result<&Loaded, ApiError> {
        self.inner.kb.as_ref().map_err(|e| ApiError::Unavailable(e.clone()))
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    /// Drops sessions idle for longer than the TTL from memory and returns
    /// how many went. Sessions in use are kept.
    pub fn evict_idle(&self) -> usize {
        self.evict_idle_for(self.inner.ttl)
    }

    pub fn evict_idle_for(&self, ttl: Duration) -> usize {
        let mut sessions = self.inner.sessions.write().unwrap_or_else(|e| e.into_inner());
        let before = sessions.len();
        sessions.retain(|_, handle| match handle.try_lock() {
            Ok(s) => s.last_access.elapsed() <= ttl,
            Err(_) => true,
        });
        before - sessions.len()
    }

    async fn session(&self, id: &str) -> Result<SessionHandle, ApiError> {
        let loaded = self.loaded()?;
        if let Some(handle) = self.inner.sessions.read().unwrap_or_else(|e| e.into_inner()).get(id) {
            return Ok(Arc::clone(handle));
        }
        if !is_session_id(id) {
            return Err(ApiError::NotFound);
        }
        let path = self.inner.log.path().to_path_buf();
        let engine = loaded.engine.clone();
        let wanted = id.to_string();
        let restored = tokio::task::spawn_blocking(move || replay(&path, &engine, Some(&wanted)))
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))??;
        let s = restored.sessions.into_iter().next().ok_or(ApiError::NotFound)?;
        let session = Session {
            id: s.session_id,
            created_at: s.created_at,
            updated_at: s.updated_at,
            client_note: s.client_note,
            state: s.state,
            last_access: Instant::now(),
        };
        let mut sessions = self.inner.sessions.write().unwrap_or_else(|e| e.into_inner());
        let handle = sessions
            .entry(id.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(session)));
        Ok(Arc::clone(handle))
    }

    fn log_line(&self, session: &Session, kind: LineKind, answer: Option<(QuestionId, Answer)>, from: usize) -> LogLine {
        let (question_id, answer) = answer.unzip();
        LogLine {
            ts: session.updated_at,
            session_id: session.id.clone(),
            kind,
            kb: self.loaded().map(|l| l.stamp.clone()).unwrap_or(KbStamp {
                title: String::new(),
                version: 0,
            }),
            client_note: matches!(kind, LineKind::Created)
                .then(|| session.client_note.clone())
                .flatten(),
            question_id,
            answer,
            events: session.state.trace()[from..].to_vec(),
        }
    }
}

fn is_session_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

fn new_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

// ---- handlers ----

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/healthz", get(healthz))
        .route("/v1/kb", get(kb_summary))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/answers", post(answer))
        .route("/v1/sessions/{id}/explanation", get(explanation))
        .route("/v1/images/{*path}", get(image))
        .with_state(state)
}

async fn healthz() -> &'static str {
    "ok"
}

async fn kb_summary(State(app): State<AppState>) -> Result<Json<KbSummary>, ApiError> {
    Ok(Json(app.loaded()?.summary.clone()))
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::Unprocessable(format!("invalid request body: {e}")))
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let loaded = app.loaded()?;
    let body: CreateBody = if body.iter().all(u8::is_ascii_whitespace) {
        CreateBody::default()
    } else {
        parse_body(&body)?
    };
    let now = Utc::now();
    let mut session = Session {
        id: new_session_id(),
        created_at: now,
        updated_at: now,
        client_note: body.client_note,
        state: loaded.engine.start(),
        last_access: Instant::now(),
    };
    session.touch(now);
    app.inner.log.append(&app.log_line(&session, LineKind::Created, None, 0))?;
    let view = CreatedView {
        session_id: session.id.clone(),
        step: StepView::of(&session.state),
    };
    app.inner
        .sessions
        .write()
        .unwrap_or_else(|e| e.into_inner())
        .insert(session.id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn answer(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<StepView>, ApiError> {
    let handle = app.session(&id).await?;
    let body: AnswerBody = parse_body(&body)?;
    let question: QuestionId = body
        .question_id
        .parse()
        .map_err(|e| ApiError::Unprocessable(format!("question_id: {e}")))?;
    // Only canonical tokens on the wire; terminal front ends may be lenient.
    let answer = match body.answer.as_str() {
        "si" => Answer::Si,
        "no" => Answer::No,
        other => {
            return Err(ApiError::Unprocessable(format!(
                "answer must be \"si\" or \"no\", got {other:?}"
            )))
        }
    };

    let mut session = handle.lock().await;
    let before = session.state.clone();
    let from = session.state.trace().len();
    match session.state.submit_answer(&question, answer) {
        Ok(()) => {}
        Err(e @ (EngineError::NotPending(_) | EngineError::SessionFinished)) => {
            return Err(ApiError::Conflict(e.to_string()))
        }
        Err(e) => return Err(ApiError::Internal(e.to_string())),
    }
    let previous_update = session.updated_at;
    session.touch(Utc::now());
    let line = app.log_line(&session, LineKind::Answered, Some((question, answer)), from);
    if let Err(e) = app.inner.log.append(&line) {
        // Unlogged transitions must not become visible.
        session.state = before;
        session.updated_at = previous_update;
        return Err(e.into());
    }
    Ok(Json(StepView::of(&session.state)))
}

async fn get_session(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    let handle = app.session(&id).await?;
    let mut session = handle.lock().await;
    session.last_access = Instant::now();
    Ok(Json(session.view()))
}

async fn explanation(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let handle = app.session(&id).await?;
    let mut session = handle.lock().await;
    session.last_access = Instant::now();
    let explanation = session
        .state
        .explain()
        .map_err(|e| ApiError::Conflict(e.to_string()))?;
    Ok(Json(explanation).into_response())
}

/// Resolves `rel` under `root`, refusing anything but plain components.
pub fn safe_join(root: &Path, rel: &str) -> Option<PathBuf> {
    if rel.is_empty() || rel.contains('\\') || rel.contains('\0') {
        return None;
    }
    let rel = Path::new(rel);
    let mut out = root.to_path_buf();
    for c in rel.components() {
        match c {
            Component::Normal(part) => out.push(part),
            _ => return None,
        }
    }
    Some(out)
}

fn content_type(path: &Path) -> &'static str {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "jpg" | "jpeg" => "image/jpeg",
        "png" => "image/png",
        "gif" => "image/gif",
        "bmp" => "image/bmp",
        "webp" => "image/webp",
        "svg" => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn image(State(app): State<AppState>, UrlPath(rel): UrlPath<String>) -> Result<Response, ApiError> {
    let root = app.inner.image_dir.as_ref().ok_or(ApiError::NotFound)?;
    let path = safe_join(root, &rel).ok_or_else(|| ApiError::BadRequest("invalid image path".into()))?;
    match tokio::fs::read(&path).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound || path.is_dir() => Err(ApiError::NotFound),
        Err(e) => Err(ApiError::Internal(format!("reading {}: {e}", path.display()))),
    }
}

// ---- serving ----

/// Binds and serves until `shutdown` resolves. Idle sessions are swept
/// periodically.
pub async fn serve(
    state: AppState,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let sweeper = {
        let state = state.clone();
        let period = state.inner.ttl.clamp(Duration::from_secs(1), Duration::from_secs(60));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                let evicted = state.evict_idle();
                if evicted > 0 {
                    tracing::debug!(evicted, "evicted idle sessions");
                }
            }
        })
    };
    let result = axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await;
    sweeper.abort();
    result
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        () = ctrl_c => {},
        () = term => {},
    }
}

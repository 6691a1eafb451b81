//! Axum routes over the session store.

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::sync::{broadcast, Mutex as AsyncMutex};

use crate::model::{parse_model, Knowledge};
use crate::tagger::Tagger;

use super::session::{Journal, LiveSession, SessionSpec};
use super::wire::*;
use super::ServiceError;

/// Where artifacts live and how sessions are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub model_dir: Option<PathBuf>,
    pub tagger_dir: Option<PathBuf>,
    /// One `<session id>.jsonl` journal per session when set.
    pub journal_dir: Option<PathBuf>,
    pub idle_ttl: Duration,
    pub max_sessions: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            model_dir: None,
            tagger_dir: None,
            journal_dir: None,
            idle_ttl: Duration::from_secs(30 * 60),
            max_sessions: 1024,
        }
    }
}

impl ServiceConfig {
    /// Defaults overridden by `PROCSIFT_MODEL_DIR`, `PROCSIFT_TAGGER_DIR` and `PROCSIFT_JOURNAL_DIR`.
    pub fn from_env() -> Self {
        let dir = |name: &str| std::env::var_os(name).map(PathBuf::from);
        ServiceConfig {
            model_dir: dir("PROCSIFT_MODEL_DIR"),
            tagger_dir: dir("PROCSIFT_TAGGER_DIR"),
            journal_dir: dir("PROCSIFT_JOURNAL_DIR"),
            ..ServiceConfig::default()
        }
    }
}

/// Items of a session's server-sent feed.
#[derive(Debug, Clone)]
enum Feed {
    Step(ApiStep),
    Finalized(ApiSummary),
}

impl Feed {
    fn events(&self) -> Vec<SseEvent> {
        match self {
            Feed::Step(s) => {
                let mut out = vec![SseEvent::default().event("step").id(s.index.to_string()).data(json(s))];
                if s.deviation {
                    let alert = serde_json::json!({"v": API_VERSION, "index": s.index, "event_type": s.event_type});
                    out.push(SseEvent::default().event("deviation").data(alert.to_string()));
                }
                out
            }
            Feed::Finalized(s) => vec![SseEvent::default().event("finalized").data(json(s))],
        }
    }
}

fn json<T: Serialize>(x: &T) -> String {
    serde_json::to_string(x).expect("api payloads serialize")
}

struct Slot {
    live: Arc<AsyncMutex<LiveSession>>,
    touched: Mutex<Instant>,
    feed: broadcast::Sender<Feed>,
}

impl Slot {
    fn touch(&self) {
        *self.touched.lock().expect("clock lock") = Instant::now();
    }

    fn idle(&self) -> Duration {
        self.touched.lock().expect("clock lock").elapsed()
    }
}

/// Sessions plus the immutable artifacts they share.
pub struct AppState {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    models: Mutex<HashMap<String, Arc<Knowledge>>>,
    taggers: Mutex<HashMap<String, Arc<Tagger>>>,
}

fn artifact_path(dir: &Option<PathBuf>, name: &str, what: &str) -> Result<PathBuf, ServiceError> {
    let dir = dir.as_ref().ok_or_else(|| ServiceError::BadRequest(format!("no {what} directory configured")))?;
    if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
        return Err(ServiceError::BadRequest(format!("bad {what} name {name:?}")));
    }
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(plain);
    }
    let json = dir.join(format!("{name}.json"));
    if json.is_file() {
        return Ok(json);
    }
    Err(ServiceError::BadRequest(format!("{what} {name:?} not found")))
}

fn cached<T>(
    cache: &Mutex<HashMap<String, Arc<T>>>,
    name: &str,
    load: impl FnOnce() -> Result<T, ServiceError>,
) -> Result<Arc<T>, ServiceError> {
    if let Some(x) = cache.lock().expect("cache lock").get(name) {
        return Ok(Arc::clone(x));
    }
    let x = Arc::new(load()?);
    cache.lock().expect("cache lock").insert(name.to_string(), Arc::clone(&x));
    Ok(x)
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(AppState {
            config,
            sessions: Mutex::default(),
            models: Mutex::default(),
            taggers: Mutex::default(),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("store lock").len()
    }

    /// Drops sessions idle for longer than the TTL; returns how many.
    pub fn expire_idle(&self) -> usize {
        let ttl = self.config.idle_ttl;
        let mut sessions = self.sessions.lock().expect("store lock");
        let before = sessions.len();
        sessions.retain(|_, slot| slot.idle() <= ttl);
        before - sessions.len()
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ServiceError> {
        let mut sessions = self.sessions.lock().expect("store lock");
        let gone = || ServiceError::NotFound(format!("no session {id:?}"));
        let slot = sessions.get(id).ok_or_else(gone)?;
        if slot.idle() > self.config.idle_ttl {
            sessions.remove(id);
            return Err(gone());
        }
        slot.touch();
        Ok(Arc::clone(slot))
    }

    fn model(&self, v: &serde_json::Value) -> Result<(String, Arc<Knowledge>), ServiceError> {
        let bad = |e: crate::model::ModelError| ServiceError::BadRequest(e.to_string());
        match v {
            serde_json::Value::String(name) => {
                let k = cached(&self.models, name, || {
                    let path = artifact_path(&self.config.model_dir, name, "model")?;
                    parse_model(&std::fs::read_to_string(path)?).map_err(bad)
                })?;
                Ok((name.clone(), k))
            }
            serde_json::Value::Object(_) => Ok(("inline".into(), Arc::new(parse_model(&v.to_string()).map_err(bad)?))),
            _ => Err(ServiceError::BadRequest("model must be a name or an inline model document".into())),
        }
    }

    fn tagger(&self, name: &str) -> Result<Arc<Tagger>, ServiceError> {
        cached(&self.taggers, name, || {
            let path = artifact_path(&self.config.tagger_dir, name, "tagger")?;
            Tagger::load(&path).map_err(|e| ServiceError::BadRequest(e.to_string()))
        })
    }

    /// Creates a session and returns its id.
    pub fn create(&self, req: &CreateSession) -> Result<(String, usize), ServiceError> {
        check_version(req.v)?;
        if self.session_count() >= self.config.max_sessions {
            self.expire_idle();
            if self.session_count() >= self.config.max_sessions {
                return Err(ServiceError::Busy(format!("session limit {} reached", self.config.max_sessions)));
            }
        }
        let (model, knowledge) = self.model(&req.model)?;
        let tagger = match &req.tagger {
            Some(name) => Some((name.clone(), self.tagger(name)?)),
            None => None,
        };
        let id = format!("{:016x}{:016x}", rand::random::<u64>(), rand::random::<u64>());
        let journal = match &self.config.journal_dir {
            Some(dir) => Some(Journal::create(&dir.join(format!("{id}.jsonl")))?),
            None => None,
        };
        let live = LiveSession::new(id.clone(), SessionSpec { knowledge, model, tagger, config: req.config.clone() }, journal)?;
        let k = live.analysis().k();
        let (feed, _) = broadcast::channel(1024);
        let slot = Slot { live: Arc::new(AsyncMutex::new(live)), touched: Mutex::new(Instant::now()), feed };
        self.sessions.lock().expect("store lock").insert(id.clone(), Arc::new(slot));
        Ok((id, k))
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code, retry) = match &self {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found", None),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request", None),
            ServiceError::Overflow(_) => (StatusCode::SERVICE_UNAVAILABLE, "solver_overflow", Some(1)),
            ServiceError::Busy(_) => (StatusCode::SERVICE_UNAVAILABLE, "busy", Some(5)),
            ServiceError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io", None),
        };
        let message = match &self {
            ServiceError::Overflow(m) => format!("{m}; retry later or with a larger session budget"),
            other => other.to_string(),
        };
        let body = ApiError { v: API_VERSION, error: code.into(), message, retry_after_secs: retry };
        let mut resp = (status, Json(body)).into_response();
        if let Some(s) = retry {
            resp.headers_mut().insert(header::RETRY_AFTER, s.into());
        }
        resp
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("malformed body: {e}")))
}

type ApiResult<T> = Result<Json<T>, ServiceError>;

/// Runs `f` on the session off the async runtime, holding its lock so
/// requests to one session complete in arrival order.
async fn with_session<T: Send + 'static>(
    slot: &Slot,
    f: impl FnOnce(&mut LiveSession, &broadcast::Sender<Feed>) -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    let mut guard = Arc::clone(&slot.live).lock_owned().await;
    let feed = slot.feed.clone();
    let out = tokio::task::spawn_blocking(move || f(&mut guard, &feed))
        .await
        .map_err(|e| ServiceError::Io(format!("session worker failed: {e}")))?;
    slot.touch();
    out
}

async fn create(State(app): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<Created>), ServiceError> {
    let req: CreateSession = parse(&body)?;
    let app2 = Arc::clone(&app);
    let (id, k) = tokio::task::spawn_blocking(move || app2.create(&req))
        .await
        .map_err(|e| ServiceError::Io(format!("session worker failed: {e}")))??;
    Ok((StatusCode::CREATED, Json(Created { v: API_VERSION, id, k })))
}

async fn post_event(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<ApiStep> {
    let slot = app.slot(&id)?;
    let req: PostEvent = parse(&body)?;
    check_version(req.v)?;
    let step = with_session(&slot, move |live, feed| {
        let step = live.push(&req.event)?;
        // Sent under the session lock, so subscribers see events in order.
        let _ = feed.send(Feed::Step(step.clone()));
        Ok(step)
    })
    .await?;
    Ok(Json(step))
}

async fn query(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<ApiAnswer> {
    let slot = app.slot(&id)?;
    let req: ApiQuery = parse(&body)?;
    Ok(Json(with_session(&slot, move |live, _| live.query(&req)).await?))
}

async fn explain(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<ApiExplanation> {
    let slot = app.slot(&id)?;
    let req: ApiExplain = parse(&body)?;
    Ok(Json(with_session(&slot, move |live, _| live.explain(&req)).await?))
}

async fn finalize(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<ApiSummary> {
    let slot = app.slot(&id)?;
    let summary = with_session(&slot, |live, feed| {
        let fresh = !live.is_finalized();
        let s = live.finalize()?;
        if fresh {
            let _ = feed.send(Feed::Finalized(s.clone()));
        }
        Ok(s)
    })
    .await?;
    Ok(Json(summary))
}

async fn state(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<ApiState> {
    let slot = app.slot(&id)?;
    let live = slot.live.lock().await;
    Ok(Json(live.state()))
}

/// Replays the session's history, then follows it live.
async fn feed(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, ServiceError> {
    let slot = app.slot(&id)?;
    let (history, rx) = {
        let live = slot.live.lock().await;
        let mut history: Vec<Feed> = live.steps().iter().cloned().map(Feed::Step).collect();
        history.extend(live.summary().cloned().map(Feed::Finalized));
        (history, slot.feed.subscribe())
    };
    let live = stream::unfold(rx, |mut rx| async move {
        // A lagging subscriber is cut off rather than shown a gap; it can reconnect.
        rx.recv().await.ok().map(|item| (item, rx))
    });
    let events = stream::iter(history)
        .chain(live)
        .flat_map(|item| stream::iter(item.events().into_iter().map(Ok)));
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/events", post(post_event))
        .route("/sessions/{id}/query", post(query))
        .route("/sessions/{id}/explain", post(explain))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/sessions/{id}/stream", get(feed))
        .route("/sessions/{id}/state", get(state))
        .with_state(app)
}

/// Serves the API on `addr` until ctrl-c, expiring idle sessions in the background.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    if let Some(dir) = &config.journal_dir {
        std::fs::create_dir_all(dir)?;
    }
    let app = AppState::new(config);
    let sweep = (app.config.idle_ttl / 4).clamp(Duration::from_millis(100), Duration::from_secs(60));
    let reaper = Arc::clone(&app);
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(sweep);
        loop {
            tick.tick().await;
            reaper.expire_idle();
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

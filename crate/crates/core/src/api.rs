//! HTTP control plane and WebSocket event stream.
//!
//! | Method | Path                          | Body / query        | Reply                 |
//! |--------|-------------------------------|---------------------|-----------------------|
//! | POST   | `/sessions`                   | `CreateSession`     | 201 `{id}`            |
//! | GET    | `/sessions/{id}`              |                     | `SessionSnapshot`     |
//! | GET    | `/sessions/{id}/events`       | `?since=seq`        | `[SessionEvent]`      |
//! | POST   | `/sessions/{id}/inputs`       | `ClientInput`       | `InputReply`          |
//! | POST   | `/sessions/{id}/save`         | `{path?}`           | `{path}`              |
//! | GET    | `/sessions/{id}/stream`       | `?since=seq`        | WebSocket upgrade     |
//!
//! Each session is owned by one writer thread. Handlers talk to it through a
//! job queue; readers see the published log and snapshot without queueing.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, oneshot};

use crate::error::{Error, Result};
use crate::event::SessionEvent;
use crate::model::{GazeState, Sentence, Vec3};
use crate::provider::{provider_for, ProviderMode, ProviderScript};
use crate::session::{BalloonButton, Session, SessionConfig, SessionSnapshot};

pub const HEARTBEAT: Duration = Duration::from_secs(15);
pub const DEFAULT_BIND_ADDR: &str = "127.0.0.1:8080";
const TICK: Duration = Duration::from_millis(100);
const BROADCAST_CAPACITY: usize = 1024;

/// Inputs a client can send, over HTTP or the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum ClientInput {
    IngestText {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
    UpdateGaze {
        origin: Vec3,
        direction: Vec3,
    },
    GrabMove {
        balloon_id: String,
        center: Vec3,
    },
    ClickButton {
        balloon_id: String,
        button: BalloonButton,
    },
    Organize,
    StartRecording,
    StopRecording,
    /// The payload may be omitted.
    Play(Option<PlayOptions>),
    StartSession,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InputReply {
    pub events: Vec<SessionEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<Vec<Sentence>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze: Option<GazeState>,
}

/// Applies one input at session time `t`.
pub fn dispatch(session: &mut Session, input: ClientInput, t: f64) -> Result<InputReply> {
    let events = |events| InputReply {
        events,
        ..InputReply::default()
    };
    Ok(match input {
        ClientInput::IngestText { text, t: at } => {
            events(session.ingest_text(&text, at.unwrap_or(t))?)
        }
        ClientInput::UpdateGaze { origin, direction } => InputReply {
            gaze: Some(session.update_gaze(origin, direction)?),
            ..InputReply::default()
        },
        ClientInput::GrabMove { balloon_id, center } => {
            events(session.grab_move(&balloon_id, center)?)
        }
        ClientInput::ClickButton { balloon_id, button } => {
            let out = session.click(&balloon_id, button)?;
            InputReply {
                events: out.events,
                view: out.view,
                gaze: None,
            }
        }
        ClientInput::Organize => events(session.organize()?),
        ClientInput::StartRecording => events(session.start_recording()?),
        ClientInput::StopRecording => events(session.stop_recording()?),
        ClientInput::Play(opts) => events(session.play(opts.and_then(|o| o.rate))?),
        ClientInput::StartSession => events(session.start_session()?),
    })
}

/// Error body shared by HTTP replies and stream frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ErrorBody {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
        }
    }

    fn unknown_session(id: &str) -> Self {
        Self::new("unknown_session", format!("no session {id:?}"))
    }
}

fn classify(err: &Error) -> (StatusCode, &'static str) {
    match err {
        Error::IllegalTransition { .. } => (StatusCode::CONFLICT, "illegal_transition"),
        Error::EmptyRecording => (StatusCode::CONFLICT, "empty_recording"),
        Error::UnknownBalloon(_) | Error::UnknownTopic(_) => {
            (StatusCode::NOT_FOUND, "unknown_balloon")
        }
        Error::Config(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_config"),
        Error::InvalidTitle(_)
        | Error::InvalidSegment(_)
        | Error::InvalidInput(_)
        | Error::TimeInversion { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input"),
        Error::Provider(_) => (StatusCode::BAD_GATEWAY, "provider"),
        Error::Persistence { .. } | Error::Io(_) | Error::Bind { .. } => {
            (StatusCode::INTERNAL_SERVER_ERROR, "persistence")
        }
    }
}

impl From<&Error> for ErrorBody {
    fn from(err: &Error) -> Self {
        Self::new(classify(err).1, err.to_string())
    }
}

struct ApiError(StatusCode, ErrorBody);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        ApiError(classify(&err).0, ErrorBody::from(&err))
    }
}

fn malformed(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, ErrorBody::new("malformed", e.to_string()))
}

/// Frames sent from server to client on the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerFrame {
    Event {
        event: SessionEvent,
    },
    Reply {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_id: Option<u64>,
        reply: InputReply,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_id: Option<u64>,
        error: ErrorBody,
    },
}

/// Frames sent from client to server on the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFrame {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<u64>,
    #[serde(flatten)]
    pub input: ClientInput,
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: String,
    pub provider: ProviderMode,
    pub script: Option<ProviderScript>,
    pub session: SessionConfig,
    pub save_dir: PathBuf,
    pub heartbeat: Duration,
    /// Advance session clocks from the wall clock. Off for tests, where
    /// inputs carry explicit times.
    pub realtime: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: DEFAULT_BIND_ADDR.into(),
            provider: ProviderMode::Rule,
            script: None,
            session: SessionConfig::default(),
            save_dir: PathBuf::from("."),
            heartbeat: HEARTBEAT,
            realtime: true,
        }
    }
}

impl ServerConfig {
    /// Reads `BIND_ADDR` and `PROVIDER_MODE`. `PROVIDER_API_KEY` is read by
    /// the live provider itself.
    pub fn from_env() -> Result<Self> {
        let mut cfg = Self::default();
        if let Ok(addr) = std::env::var("BIND_ADDR") {
            cfg.bind = addr;
        }
        if let Ok(mode) = std::env::var("PROVIDER_MODE") {
            cfg.provider = mode.parse().map_err(Error::Config)?;
        }
        Ok(cfg)
    }
}

enum Job {
    Input(ClientInput, oneshot::Sender<Result<InputReply>>),
    Save(PathBuf, oneshot::Sender<Result<()>>),
}

struct Published {
    log: RwLock<Vec<SessionEvent>>,
    snapshot: RwLock<SessionSnapshot>,
}

impl Published {
    fn events_since(&self, since: u64) -> Vec<SessionEvent> {
        let log = self.log.read().expect("log lock");
        log[(since as usize).min(log.len())..].to_vec()
    }
}

struct SessionHandle {
    jobs: mpsc::Sender<Job>,
    published: Arc<Published>,
    events: broadcast::Sender<SessionEvent>,
}

impl SessionHandle {
    fn spawn(session: Session, realtime: bool) -> Self {
        let (jobs, rx) = mpsc::channel();
        let (events, _) = broadcast::channel(BROADCAST_CAPACITY);
        let published = Arc::new(Published {
            log: RwLock::new(session.events().to_vec()),
            snapshot: RwLock::new(session.snapshot()),
        });
        let writer = Writer {
            session,
            published: published.clone(),
            events: events.clone(),
            epoch: Instant::now(),
            realtime,
        };
        std::thread::spawn(move || writer.run(rx));
        Self {
            jobs,
            published,
            events,
        }
    }

    async fn submit<T>(&self, make: impl FnOnce(oneshot::Sender<Result<T>>) -> Job) -> Result<T> {
        let (tx, rx) = oneshot::channel();
        let gone = || Error::InvalidInput("session writer stopped".into());
        self.jobs.send(make(tx)).map_err(|_| gone())?;
        rx.await.map_err(|_| gone())?
    }
}

struct Writer {
    session: Session,
    published: Arc<Published>,
    events: broadcast::Sender<SessionEvent>,
    epoch: Instant,
    realtime: bool,
}

impl Writer {
    fn run(mut self, rx: mpsc::Receiver<Job>) {
        loop {
            match rx.recv_timeout(TICK) {
                Ok(Job::Input(input, reply)) => {
                    let t = self.tick();
                    let result = dispatch(&mut self.session, input, t);
                    self.publish();
                    let _ = reply.send(result);
                }
                Ok(Job::Save(path, reply)) => {
                    let _ = reply.send(self.session.save(path));
                }
                Err(RecvTimeoutError::Timeout) => {
                    self.tick();
                    self.publish();
                }
                Err(RecvTimeoutError::Disconnected) => return,
            }
        }
    }

    /// Advances a realtime session to the wall clock and returns the time
    /// to stamp the next input with.
    fn tick(&mut self) -> f64 {
        if self.realtime {
            let wall = self.epoch.elapsed().as_secs_f64();
            if wall > self.session.now() {
                if let Err(e) = self.session.advance_to(wall) {
                    tracing::warn!("clock advance failed: {e}");
                }
            }
        }
        self.session.now()
    }

    fn publish(&mut self) {
        let fresh = {
            let mut log = self.published.log.write().expect("log lock");
            let fresh = self.session.events_since(log.len() as u64).to_vec();
            log.extend(fresh.iter().cloned());
            fresh
        };
        *self.published.snapshot.write().expect("snapshot lock") = self.session.snapshot();
        for ev in fresh {
            let _ = self.events.send(ev);
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<SessionHandle>>>>,
    next_id: Arc<AtomicU64>,
    config: Arc<ServerConfig>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        Self {
            sessions: Arc::default(),
            next_id: Arc::new(AtomicU64::new(1)),
            config: Arc::new(config),
        }
    }

    fn get(&self, id: &str) -> std::result::Result<Arc<SessionHandle>, ApiError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, ErrorBody::unknown_session(id)))
    }

    /// Creates a session with the server's provider; `config` defaults to
    /// the server's session config.
    pub fn create(&self, config: Option<SessionConfig>, seed: Option<u64>) -> Result<String> {
        let mut config = config.unwrap_or_else(|| self.config.session.clone());
        if let Some(seed) = seed {
            config.room.rng_seed = seed;
        }
        let provider = provider_for(self.config.provider, self.config.script.as_ref())?;
        Ok(self.insert(Session::new(config, provider)?))
    }

    /// Registers an existing session, e.g. one loaded from disk.
    pub fn insert(&self, session: Session) -> String {
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let handle = SessionHandle::spawn(session, self.config.realtime);
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(id.clone(), Arc::new(handle));
        id
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_snapshot))
        .route("/sessions/{id}/events", get(get_events))
        .route("/sessions/{id}/inputs", post(post_input))
        .route("/sessions/{id}/save", post(save_session))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

/// Binds and serves until the process stops.
pub async fn serve(config: ServerConfig) -> Result<()> {
    let (listener, addr) = bind(&config.bind).await?;
    tracing::info!("listening on {addr}");
    axum::serve(listener, router(AppState::new(config))).await?;
    Ok(())
}

/// Binds and serves in the background; returns the bound address.
pub async fn spawn(config: ServerConfig) -> Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let bind_addr = config.bind.clone();
    spawn_app(AppState::new(config), &bind_addr).await
}

/// Like [`spawn`], sharing `state` with the caller.
pub async fn spawn_app(
    state: AppState,
    addr: &str,
) -> Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let (listener, addr) = bind(addr).await?;
    let app = router(state);
    let task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!("server stopped: {e}");
        }
    });
    Ok((addr, task))
}

async fn bind(addr: &str) -> Result<(tokio::net::TcpListener, SocketAddr)> {
    let bind_err = |source| Error::Bind {
        addr: addr.to_string(),
        source,
    };
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(bind_err)?;
    let local = listener.local_addr().map_err(bind_err)?;
    Ok((listener, local))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CreateSession {
    config: Option<SessionConfig>,
    seed: Option<u64>,
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> std::result::Result<impl IntoResponse, ApiError> {
    let req: CreateSession = if body.is_empty() {
        CreateSession::default()
    } else {
        serde_json::from_slice(&body).map_err(malformed)?
    };
    let id = state.create(req.config, req.seed)?;
    Ok((StatusCode::CREATED, Json(serde_json::json!({ "id": id }))))
}

async fn get_snapshot(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> std::result::Result<Json<SessionSnapshot>, ApiError> {
    let handle = state.get(&id)?;
    let snapshot = handle.published.snapshot.read().expect("snapshot lock").clone();
    Ok(Json(snapshot))
}

#[derive(Debug, Default, Deserialize)]
struct Since {
    #[serde(default)]
    since: u64,
}

async fn get_events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<Since>,
) -> std::result::Result<Json<Vec<SessionEvent>>, ApiError> {
    Ok(Json(state.get(&id)?.published.events_since(q.since)))
}

async fn post_input(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> std::result::Result<Json<InputReply>, ApiError> {
    let handle = state.get(&id)?;
    let input: ClientInput = serde_json::from_slice(&body).map_err(malformed)?;
    Ok(Json(handle.submit(|tx| Job::Input(input, tx)).await?))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SaveRequest {
    path: Option<PathBuf>,
}

async fn save_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> std::result::Result<Json<serde_json::Value>, ApiError> {
    let handle = state.get(&id)?;
    let req: SaveRequest = if body.is_empty() {
        SaveRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(malformed)?
    };
    let path = req.path.unwrap_or_else(|| {
        state
            .config
            .save_dir
            .join(format!("{id}{}", crate::session::SESSION_FILE_SUFFIX))
    });
    handle.submit(|tx| Job::Save(path.clone(), tx)).await?;
    Ok(Json(serde_json::json!({ "path": path })))
}

async fn stream(
    ws: WebSocketUpgrade,
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<Since>,
) -> Response {
    let handle = state.get(&id).ok();
    let heartbeat = state.config.heartbeat;
    ws.on_upgrade(move |socket| async move {
        match handle {
            Some(handle) => connection(socket, handle, q.since, heartbeat).await,
            None => {
                let mut socket = socket;
                let frame = ServerFrame::Error {
                    request_id: None,
                    error: ErrorBody::unknown_session(&id),
                };
                let _ = send_frame(&mut socket, &frame).await;
                let _ = socket.send(Message::Close(None)).await;
            }
        }
    })
}

async fn send_frame(socket: &mut WebSocket, frame: &ServerFrame) -> bool {
    let text = serde_json::to_string(frame).expect("frames serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// Sends every published event after `last`, advancing `last`.
async fn catch_up(socket: &mut WebSocket, published: &Published, last: &mut u64) -> bool {
    for event in published.events_since(*last) {
        *last = event.seq;
        if !send_frame(socket, &ServerFrame::Event { event }).await {
            return false;
        }
    }
    true
}

async fn connection(mut socket: WebSocket, handle: Arc<SessionHandle>, since: u64, heartbeat: Duration) {
    // Subscribe before reading the log so nothing falls between the two.
    let mut rx = handle.events.subscribe();
    let mut last = since;
    if !catch_up(&mut socket, &handle.published, &mut last).await {
        return;
    }
    let mut ping = tokio::time::interval_at(tokio::time::Instant::now() + heartbeat, heartbeat);
    loop {
        tokio::select! {
            ev = rx.recv() => match ev {
                Ok(event) if event.seq <= last => {}
                Ok(event) if event.seq == last + 1 => {
                    last = event.seq;
                    if !send_frame(&mut socket, &ServerFrame::Event { event }).await {
                        return;
                    }
                }
                Ok(_) | Err(broadcast::error::RecvError::Lagged(_)) => {
                    if !catch_up(&mut socket, &handle.published, &mut last).await {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            msg = socket.recv() => {
                let text = match msg {
                    Some(Ok(Message::Text(text))) => text,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                let frame = match serde_json::from_str::<InputFrame>(&text) {
                    Ok(frame) => {
                        let result = handle.submit(|tx| Job::Input(frame.input, tx)).await;
                        // Deliver the events this input produced before its reply.
                        if !catch_up(&mut socket, &handle.published, &mut last).await {
                            return;
                        }
                        match result {
                            Ok(reply) => ServerFrame::Reply { request_id: frame.request_id, reply },
                            Err(e) => ServerFrame::Error { request_id: frame.request_id, error: ErrorBody::from(&e) },
                        }
                    }
                    Err(e) => ServerFrame::Error {
                        request_id: None,
                        error: ErrorBody::new("malformed", e.to_string()),
                    },
                };
                if !send_frame(&mut socket, &frame).await {
                    return;
                }
            }
            _ = ping.tick() => {
                if socket.send(Message::Ping(Bytes::new())).await.is_err() {
                    return;
                }
            }
        }
    }
}

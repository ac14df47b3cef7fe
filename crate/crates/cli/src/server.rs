//! HTTP API and session stream.
//!
//! Read-only JSON endpoints expose the pack; `/ws/session` runs one
//! [`SessionHost`] per connection, advancing it on a timer and answering
//! client messages in between.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::handler::HandlerWithoutStateExt;
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::NaiveTime;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::time::MissedTickBehavior;
use tower_http::services::ServeDir;
use tracing::{debug, info, warn};
use zooguide::content::{events_between, search, table_sizes, time_of_day, ContentPack};
use zooguide::engine::SessionConfig;
use zooguide::simulator::{build_walk, FixStream, WalkScript};
use zooguide::wire::{Envelope, ErrorCode, HostOptions, ServerBody, ServerMessage, SessionHost};

use crate::commands::{load, read_walk};
use crate::Status;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub pack_dir: PathBuf,
    pub host: String,
    pub port: u16,
    pub walk: Option<PathBuf>,
    pub seed: Option<u64>,
    pub speedup: f64,
    pub ui_dir: Option<PathBuf>,
}

/// Shared, immutable service state. Sessions own everything mutable.
#[derive(Clone)]
pub struct AppState {
    pack: Arc<ContentPack>,
    walk: Option<Arc<FixStream>>,
    config: SessionConfig,
    host_options: HostOptions,
    speedup: f64,
    next_session: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(pack: Arc<ContentPack>, walk: Option<&WalkScript>, seed: Option<u64>, speedup: f64) -> Result<Self, String> {
        if !(speedup.is_finite() && speedup > 0.0) {
            return Err(format!("speedup must be a positive number, got {speedup}"));
        }
        let walk = walk.map(build_walk).transpose().map_err(|e| e.to_string())?;
        let host_options = HostOptions {
            walker_seed: seed.unwrap_or_default(),
            ..HostOptions::default()
        };
        Ok(AppState {
            pack,
            walk: walk.map(Arc::new),
            config: SessionConfig::default(),
            host_options,
            speedup,
            next_session: Arc::new(AtomicU64::new(1)),
        })
    }

    pub fn pack(&self) -> &Arc<ContentPack> {
        &self.pack
    }

    fn new_host(&self) -> Result<SessionHost, String> {
        let id = format!("s{}", self.next_session.fetch_add(1, Ordering::Relaxed));
        SessionHost::new(
            id,
            self.pack.clone(),
            self.config.clone(),
            self.walk.as_deref().cloned(),
            self.host_options,
        )
        .map_err(|e| e.to_string())
    }
}

/// Structured error reply: `{"error": {"code", "message"}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "invalid_request",
            message: message.into(),
        }
    }

    fn not_found() -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code: "not_found",
            message: "no such resource".into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

async fn not_found() -> ApiError {
    ApiError::not_found()
}

pub fn router(state: AppState, ui_dir: Option<&Path>) -> Router {
    let media = ServeDir::new(&state.pack.root).not_found_service(not_found.into_service());
    let api = Router::new()
        .route("/api/manifest", get(manifest))
        .route("/api/animals", get(animals))
        .route("/api/events", get(events))
        .route("/api/hotspots", get(hotspots))
        .route("/ws/session", get(session_stream))
        .nest_service("/media", media)
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).not_found_service(not_found.into_service())),
        None => api.route("/", get(placeholder_page)).fallback(not_found),
    }
}

async fn placeholder_page() -> Html<&'static str> {
    Html(
        "<!doctype html><title>zooguide</title>\
         <p>No UI directory configured. The API is under <code>/api/</code> and the session stream at \
         <code>/ws/session</code>.</p>",
    )
}

async fn manifest(State(state): State<AppState>) -> Json<Value> {
    let manifest = &state.pack.manifest;
    let mut body = serde_json::to_value(manifest).expect("manifest serializes");
    body["map_image_url"] = json!(format!("/media/{}", manifest.map_image));
    body["tables"] = json!(table_sizes(&state.pack));
    Json(body)
}

#[derive(Debug, Deserialize)]
struct AnimalsQuery {
    q: Option<String>,
}

async fn animals(State(state): State<AppState>, Query(query): Query<AnimalsQuery>) -> Json<Value> {
    let records = match &query.q {
        Some(q) => json!(search(&state.pack, q)),
        None => json!(state.pack.animals),
    };
    Json(records)
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    from: Option<String>,
    to: Option<String>,
}

async fn events(State(state): State<AppState>, Query(query): Query<EventsQuery>) -> Result<Json<Value>, ApiError> {
    let parse = |name: &str, text: &Option<String>, default: NaiveTime| match text {
        None => Ok(default),
        Some(t) => time_of_day::parse(t).ok_or_else(|| ApiError::bad_request(format!("{name} must be HH:MM, got {t:?}"))),
    };
    let from = parse("from", &query.from, NaiveTime::MIN)?;
    let to = parse("to", &query.to, NaiveTime::from_hms_nano_opt(23, 59, 59, 999_999_999).expect("valid constant time"))?;
    Ok(Json(json!(events_between(&state.pack, from, to))))
}

async fn hotspots(State(state): State<AppState>) -> Json<Value> {
    let pack = &state.pack;
    let list: Vec<Value> = pack
        .hotspots
        .iter()
        .map(|h| {
            let mut v = serde_json::to_value(h).expect("hotspot serializes");
            v["anchor_px"] = json!(pack.calibration.geo_to_pixel(h.anchor()));
            v
        })
        .collect();
    Json(Value::Array(list))
}

async fn session_stream(State(state): State<AppState>, upgrade: WebSocketUpgrade) -> Response {
    upgrade.on_upgrade(move |socket| run_session(socket, state))
}

async fn send(socket: &mut WebSocket, message: &ServerMessage) -> Result<(), axum::Error> {
    socket.send(Message::Text(message.to_json().into())).await
}

async fn run_session(mut socket: WebSocket, state: AppState) {
    let mut host = match state.new_host() {
        Ok(host) => host,
        Err(message) => {
            warn!(%message, "cannot start session");
            return;
        }
    };
    info!(session = host.id(), "session opened");
    if send(&mut socket, &host.hello()).await.is_err() {
        return;
    }
    let period = Duration::from_secs_f64(host.period_s() / state.speedup).max(Duration::from_micros(1));
    let mut ticker = tokio::time::interval(period);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);

    loop {
        let replies = tokio::select! {
            _ = ticker.tick(), if !host.session().is_closed() => host.advance(),
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    debug!(session = host.id(), %text, "client message");
                    host.handle_text(text.as_str())
                }
                Some(Ok(Message::Binary(_))) => vec![Envelope::new(
                    host.id(),
                    ServerBody::Error {
                        code: ErrorCode::MalformedMessage,
                        message: "binary frames are not supported".into(),
                    },
                )],
                Some(Ok(Message::Ping(_) | Message::Pong(_))) => Vec::new(),
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
            },
        };
        for message in &replies {
            if send(&mut socket, message).await.is_err() {
                info!(session = host.id(), "client went away");
                return;
            }
        }
    }
    info!(session = host.id(), "session closed");
}

pub async fn serve(listener: TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Entry point for `zooguide serve`.
pub fn run_blocking(options: ServeOptions) -> Status {
    let pack = match load(&options.pack_dir) {
        Ok(pack) => Arc::new(pack),
        Err((findings, status)) => {
            for finding in findings {
                eprintln!("{finding}");
            }
            return status;
        }
    };
    let script = match options.walk.as_deref().map(|w| read_walk(w, options.seed)).transpose() {
        Ok(script) => script,
        Err((message, status)) => {
            eprintln!("error: {message}");
            return status;
        }
    };
    let state = match AppState::new(pack, script.as_ref(), options.seed, options.speedup) {
        Ok(state) => state,
        Err(message) => {
            eprintln!("error: {message}");
            return Status::Invalid;
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return Status::Io;
        }
    };
    runtime.block_on(async {
        let listener = match TcpListener::bind((options.host.as_str(), options.port)).await {
            Ok(listener) => listener,
            Err(e) => {
                eprintln!("error: cannot listen on {}:{}: {e}", options.host, options.port);
                return Status::Io;
            }
        };
        let addr: SocketAddr = listener.local_addr().expect("bound listener has an address");
        println!("listening on http://{addr}");
        let app = router(state, options.ui_dir.as_deref());
        match serve(listener, app).await {
            Ok(()) => Status::Ok,
            Err(e) => {
                eprintln!("error: {e}");
                Status::Io
            }
        }
    })
}

//! Stream protocol between the guide service and its UI, plus
//! [`SessionHost`], which runs one session behind that protocol without any
//! transport attached.
//!
//! Every message is a JSON object carrying `protocol_version`, `session_id`
//! and a `type` tag. Client messages with an unknown tag, a wrong version or
//! a foreign session id get a structured `error` reply.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::content::ContentPack;
use crate::engine::{ConnectionState, EngineError, LogEntry, MenuAction, MenuResponse, Session, SessionConfig};
use crate::geo::{GeoPoint, PixelPoint};
use crate::nmea::parse_bytes;
use crate::simulator::{FixSink, FixStream, ReplaySummary, SteerableWalker, WALKING_SPEED_MPS};
use crate::viewport::{Extent, ScreenPoint};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleHotspot {
    pub id: String,
    pub name: String,
    pub screen: ScreenPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewportSnapshot {
    pub elapsed_s: f64,
    pub center: PixelPoint,
    pub zoom: f64,
    pub screen: Extent,
    /// Always the screen centre.
    pub cursor: ScreenPoint,
    pub visible_hotspots: Vec<VisibleHotspot>,
    pub connection: ConnectionState,
    pub out_of_range: bool,
}

impl ViewportSnapshot {
    pub fn of(session: &Session) -> Self {
        let viewport = session.viewport();
        let pack = session.pack();
        ViewportSnapshot {
            elapsed_s: session.clock_s(),
            center: viewport.center,
            zoom: viewport.zoom(),
            screen: viewport.screen,
            cursor: viewport.screen_center(),
            visible_hotspots: viewport
                .visible_hotspots(&pack.hotspots, &pack.calibration)
                .into_iter()
                .map(|(id, screen)| VisibleHotspot {
                    name: pack.hotspot(&id).map(|h| h.name.clone()).unwrap_or_default(),
                    id,
                    screen,
                })
                .collect(),
            connection: session.state(),
            out_of_range: session.is_out_of_range(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedMessage,
    UnknownMessage,
    UnsupportedVersion,
    SessionMismatch,
    NotReady,
    InvalidState,
    SessionClosed,
    InvalidRequest,
}

impl From<&EngineError> for ErrorCode {
    fn from(err: &EngineError) -> Self {
        match err {
            EngineError::NotReady(_) => ErrorCode::NotReady,
            EngineError::InvalidState { .. } => ErrorCode::InvalidState,
            EngineError::SessionClosed => ErrorCode::SessionClosed,
            EngineError::ConfigInvalid(_) | EngineError::InvalidRequest(_) => ErrorCode::InvalidRequest,
        }
    }
}

/// Server-to-client payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerBody {
    Hello {
        pack: String,
        map_extent: Extent,
        screen: Extent,
    },
    Event {
        entry: LogEntry,
    },
    Snapshot {
        snapshot: ViewportSnapshot,
    },
    MenuResponse {
        response: MenuResponse,
    },
    SteerAccepted {
        target: GeoPoint,
    },
    /// The scripted walk has been fully replayed.
    WalkComplete {
        summary: ReplaySummary,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

/// Client-to-server payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientBody {
    /// Walk the visitor towards the map point under this screen position.
    Steer { screen: ScreenPoint },
    ZoomStep { direction: i32 },
    MenuAction { action: MenuAction },
    Restart,
}

impl ClientBody {
    pub const TAGS: [&'static str; 4] = ["steer", "zoom_step", "menu_action", "restart"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub protocol_version: u32,
    pub session_id: String,
    #[serde(flatten)]
    pub body: T,
}

pub type ServerMessage = Envelope<ServerBody>;
pub type ClientMessage = Envelope<ClientBody>;

impl<T: Serialize> Envelope<T> {
    pub fn new(session_id: &str, body: T) -> Self {
        Envelope {
            protocol_version: PROTOCOL_VERSION,
            session_id: session_id.to_string(),
            body,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize")
    }
}

/// Decodes a client message for `session_id`, or explains why not.
pub fn decode_client(text: &str, session_id: &str) -> Result<ClientBody, (ErrorCode, String)> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| (ErrorCode::MalformedMessage, e.to_string()))?;
    let object = value
        .as_object_mut()
        .ok_or_else(|| (ErrorCode::MalformedMessage, "message must be a JSON object".to_string()))?;
    match object.remove("protocol_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(PROTOCOL_VERSION) => {}
        other => {
            return Err((
                ErrorCode::UnsupportedVersion,
                format!("expected protocol_version {PROTOCOL_VERSION}, got {other:?}"),
            ))
        }
    }
    match object.remove("session_id") {
        Some(Value::String(id)) if id == session_id => {}
        other => {
            return Err((
                ErrorCode::SessionMismatch,
                format!("message addressed to {other:?}, this is session {session_id:?}"),
            ))
        }
    }
    let tag = object.get("type").and_then(Value::as_str).unwrap_or_default().to_string();
    if !ClientBody::TAGS.contains(&tag.as_str()) {
        return Err((ErrorCode::UnknownMessage, format!("unknown message type {tag:?}")));
    }
    serde_json::from_value(value).map_err(|e| (ErrorCode::MalformedMessage, e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HostOptions {
    /// Clock rate when no scripted walk sets one.
    pub sample_rate_hz: f64,
    pub walker_speed_mps: f64,
    pub walker_noise_sigma_m: f64,
    pub walker_seed: u64,
}

impl Default for HostOptions {
    fn default() -> Self {
        HostOptions {
            sample_rate_hz: 1.0,
            walker_speed_mps: WALKING_SPEED_MPS,
            walker_noise_sigma_m: 0.0,
            walker_seed: 0,
        }
    }
}

struct ScriptedWalk {
    stream: FixStream,
    next_item: usize,
    summary: ReplaySummary,
}

/// One guide session driven on a fixed clock, fed by a scripted walk and then
/// by an operator-steered walker.
pub struct SessionHost {
    id: String,
    session: Session,
    options: HostOptions,
    script: Option<ScriptedWalk>,
    walker: Option<SteerableWalker>,
    step: usize,
    sample_rate_hz: f64,
    sent_events: usize,
}

impl SessionHost {
    pub fn new(
        id: impl Into<String>,
        pack: Arc<ContentPack>,
        config: SessionConfig,
        walk: Option<FixStream>,
        options: HostOptions,
    ) -> Result<Self, EngineError> {
        let session = Session::new(pack, config)?;
        let sample_rate_hz = walk.as_ref().map_or(options.sample_rate_hz, |w| w.sample_rate_hz);
        Ok(SessionHost {
            id: id.into(),
            session,
            options,
            script: walk.map(|stream| ScriptedWalk {
                stream,
                next_item: 0,
                summary: ReplaySummary::default(),
            }),
            walker: None,
            step: 0,
            sample_rate_hz,
            sent_events: 0,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    fn message(&self, body: ServerBody) -> ServerMessage {
        Envelope::new(&self.id, body)
    }

    pub fn hello(&self) -> ServerMessage {
        let pack = self.session.pack();
        self.message(ServerBody::Hello {
            pack: pack.manifest.name.clone(),
            map_extent: pack.manifest.map_extent,
            screen: self.session.config().screen,
        })
    }

    fn snapshot(&self) -> ServerMessage {
        self.message(ServerBody::Snapshot {
            snapshot: ViewportSnapshot::of(&self.session),
        })
    }

    fn error(&self, code: ErrorCode, message: impl Into<String>) -> ServerMessage {
        self.message(ServerBody::Error {
            code,
            message: message.into(),
        })
    }

    fn flush_events(&mut self, out: &mut Vec<ServerMessage>) {
        let fresh: Vec<LogEntry> = self.session.log()[self.sent_events..].to_vec();
        self.sent_events += fresh.len();
        out.extend(fresh.into_iter().map(|entry| self.message(ServerBody::Event { entry })));
    }

    /// Where the walker starts: the last known fix, else the map centre.
    fn walker_start(&self) -> GeoPoint {
        if let Some(p) = self.session.last_fix().and_then(|f| f.position()) {
            return p;
        }
        let extent = self.session.pack().manifest.map_extent;
        let centre = PixelPoint::new(extent.width / 2.0, extent.height / 2.0);
        self.session
            .pack()
            .calibration
            .pixel_to_geo(centre)
            .unwrap_or_else(|_| self.session.pack().calibration.control_points[0].geo)
    }

    fn ensure_walker(&mut self) -> &mut SteerableWalker {
        if self.walker.is_none() {
            let start = self.walker_start();
            self.walker = Some(SteerableWalker::new(
                start,
                self.options.walker_speed_mps,
                self.options.walker_noise_sigma_m,
                self.options.walker_seed,
            ));
        }
        self.walker.as_mut().expect("walker just created")
    }

    /// Runs one clock step: tick, then any receiver output for the step.
    pub fn advance(&mut self) -> Vec<ServerMessage> {
        let mut out = Vec::new();
        if self.session.is_closed() {
            return out;
        }
        let step = self.step;
        let elapsed = step as f64 / self.sample_rate_hz;
        self.step += 1;
        self.session.on_clock(elapsed);

        let mut finished = None;
        if let Some(script) = &mut self.script {
            let items = &script.stream.items;
            while script.next_item < items.len() && items[script.next_item].index == step {
                let parsed = parse_bytes(&items[script.next_item].payload);
                match &parsed {
                    Ok(s) if s.fix().and_then(|f| f.position()).is_some() => script.summary.delivered += 1,
                    Ok(_) => script.summary.dropped += 1,
                    Err(_) => script.summary.garbage += 1,
                }
                self.session.on_sentence(elapsed, &parsed);
                script.next_item += 1;
            }
            if step + 1 >= script.stream.steps {
                finished = Some(script.summary);
            }
        } else {
            let dt = self.period_s();
            let line = self.ensure_walker().step(dt, elapsed);
            let parsed = parse_bytes(&line);
            self.session.on_sentence(elapsed, &parsed);
        }

        self.flush_events(&mut out);
        out.push(self.snapshot());
        if let Some(summary) = finished {
            self.script = None;
            out.push(self.message(ServerBody::WalkComplete { summary }));
        }
        out
    }

    /// Applies one client message and returns the replies.
    pub fn handle_text(&mut self, text: &str) -> Vec<ServerMessage> {
        match decode_client(text, &self.id) {
            Ok(body) => self.handle(body),
            Err((code, message)) => vec![self.error(code, message)],
        }
    }

    pub fn handle(&mut self, body: ClientBody) -> Vec<ServerMessage> {
        let mut out = Vec::new();
        match body {
            ClientBody::Steer { screen } => {
                if self.session.is_closed() {
                    return vec![self.error(ErrorCode::SessionClosed, "session closed")];
                }
                let map_point = self.session.viewport().screen_to_map(screen);
                match self.session.pack().calibration.pixel_to_geo(map_point) {
                    Ok(target) => {
                        // steering takes over from any scripted walk
                        self.script = None;
                        self.ensure_walker().steer_to(target);
                        out.push(self.message(ServerBody::SteerAccepted { target }));
                    }
                    Err(err) => out.push(self.error(ErrorCode::InvalidRequest, err.to_string())),
                }
            }
            ClientBody::ZoomStep { direction } => match self.session.zoom_step(direction) {
                Ok(_) => out.push(self.snapshot()),
                Err(err) => out.push(self.error((&err).into(), err.to_string())),
            },
            ClientBody::MenuAction { action } => match self.session.menu_action(&action) {
                Ok(response) => {
                    self.flush_events(&mut out);
                    out.push(self.message(ServerBody::MenuResponse { response }));
                }
                Err(err) => out.push(self.error((&err).into(), err.to_string())),
            },
            ClientBody::Restart => match self.session.restart() {
                Ok(_) => {
                    self.flush_events(&mut out);
                    out.push(self.snapshot());
                }
                Err(err) => out.push(self.error((&err).into(), err.to_string())),
            },
        }
        out
    }
}

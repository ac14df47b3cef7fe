//! Guide session: connection lifecycle, fix intake and the six-item menu.
//!
//! Connection transitions (`attempt` counts connection attempts, the restart
//! being the second):
//!
//! | from       | input                                   | to                 |
//! |------------|-----------------------------------------|--------------------|
//! | Splash     | tick, `splash_seconds` elapsed          | Connecting (1)     |
//! | Connecting | usable fix                              | Connected          |
//! | Connecting | tick, `connect_timeout_s` without fix   | Failed             |
//! | Connected  | tick, `fix_gap_s` since last fix        | Lost               |
//! | Lost       | usable fix                              | Connected          |
//! | Lost       | tick, `connect_timeout_s` in Lost       | Failed             |
//! | Failed (1) | restart                                 | Connecting (2)     |
//! | Failed (2) | (immediately, same tick)                | Exited             |
//! | any        | menu Close                              | Exited             |
//!
//! Everything else leaves the state unchanged. Fixes are ignored in Splash,
//! Failed and Exited, and NoFix-quality fixes are ignored everywhere.

use std::sync::Arc;

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{self, time_of_day, AnimalRecord, ContentPack, EventRecord};
use crate::geo::{GeoPoint, PixelPoint};
use crate::geofence::{self, FenceEvent, FenceState, DEFAULT_EXIT_BUFFER_M};
use crate::nmea::{GeoFix, NmeaError, ParsedSentence};
use crate::simulator::FixSink;
use crate::viewport::{in_zoo_range, Extent, Viewport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionState {
    Splash,
    Connecting,
    Connected,
    Lost,
    Failed,
    Exited,
}

impl ConnectionState {
    pub const ALL: [ConnectionState; 6] = [
        ConnectionState::Splash,
        ConnectionState::Connecting,
        ConnectionState::Connected,
        ConnectionState::Lost,
        ConnectionState::Failed,
        ConnectionState::Exited,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub splash_seconds: f64,
    pub connect_timeout_s: f64,
    pub fix_gap_s: f64,
    pub exit_buffer_m: f64,
    /// Device screen in pixels.
    pub screen: Extent,
    /// Entries listed by the Tour Guide menu.
    pub tour_guide_k: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            splash_seconds: 5.0,
            connect_timeout_s: 30.0,
            fix_gap_s: 10.0,
            exit_buffer_m: DEFAULT_EXIT_BUFFER_M,
            screen: Extent::new(240.0, 320.0),
            tour_guide_k: 5,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let problem = if !(self.splash_seconds.is_finite() && self.splash_seconds >= 0.0) {
            Some("splash_seconds must be >= 0")
        } else if !positive(self.connect_timeout_s) {
            Some("connect_timeout_s must be > 0")
        } else if !positive(self.fix_gap_s) {
            Some("fix_gap_s must be > 0")
        } else if !(self.exit_buffer_m.is_finite() && self.exit_buffer_m >= 0.0) {
            Some("exit_buffer_m must be >= 0")
        } else if !self.screen.is_valid() {
            Some("screen must be positive")
        } else if self.tour_guide_k == 0 {
            Some("tour_guide_k must be >= 1")
        } else {
            None
        };
        match problem {
            Some(message) => Err(EngineError::ConfigInvalid(message.to_string())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("not ready: menu needs a connected receiver (state {0:?})")]
    NotReady(ConnectionState),
    #[error("invalid state for restart: {state:?}, attempt {attempt}")]
    InvalidState { state: ConnectionState, attempt: u8 },
    #[error("session closed")]
    SessionClosed,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentSummary {
    pub content_id: String,
    pub name: String,
    pub species: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "payload")]
pub enum GuideEvent {
    FixAccepted {
        fix: GeoFix,
        pixel: PixelPoint,
        in_range: bool,
    },
    HotspotEntered {
        id: String,
        content: ContentSummary,
    },
    HotspotExited {
        id: String,
    },
    ConnectionChanged {
        state: ConnectionState,
        attempt: u8,
    },
    OutOfRange {
        fix: GeoFix,
    },
}

/// One line of the exported event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub elapsed_s: f64,
    #[serde(flatten)]
    pub event: GuideEvent,
}

/// The six menu entries. Any other tag fails to deserialize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MenuAction {
    CheckConnection,
    ShowCoordinates,
    TourGuide,
    Search {
        query: String,
    },
    Events {
        #[serde(with = "time_of_day")]
        from: NaiveTime,
        #[serde(with = "time_of_day")]
        to: NaiveTime,
    },
    Close,
}

impl MenuAction {
    pub const TAGS: [&'static str; 6] = [
        "check_connection",
        "show_coordinates",
        "tour_guide",
        "search",
        "events",
        "close",
    ];

    fn allowed_when_not_connected(&self) -> bool {
        matches!(self, MenuAction::CheckConnection | MenuAction::Close)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourStop {
    pub id: String,
    pub name: String,
    pub distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "menu", rename_all = "snake_case")]
pub enum MenuResponse {
    Connection {
        state: ConnectionState,
        attempt: u8,
        seconds_since_fix: Option<f64>,
    },
    Coordinates {
        text: String,
        latitude: f64,
        longitude: f64,
    },
    TourGuide {
        nearest: Vec<TourStop>,
    },
    Search {
        results: Vec<AnimalRecord>,
    },
    Events {
        events: Vec<EventRecord>,
    },
    Closed,
}

/// Text shown by Show Coordinates.
pub fn format_coordinates(p: GeoPoint) -> String {
    format!("lat {:.6}, lon {:.6}", p.lat, p.lon)
}

#[derive(Debug, Clone)]
pub struct Session {
    pack: Arc<ContentPack>,
    config: SessionConfig,
    viewport: Viewport,
    fence: FenceState,
    state: ConnectionState,
    attempt: u8,
    clock_s: f64,
    /// When the current Connecting or Lost phase began.
    phase_start_s: f64,
    last_fix: Option<GeoFix>,
    last_fix_s: Option<f64>,
    out_of_range: bool,
    log: Vec<LogEntry>,
}

impl Session {
    pub fn new(pack: Arc<ContentPack>, config: SessionConfig) -> Result<Session, EngineError> {
        config.validate()?;
        let viewport = Viewport::new(config.screen, pack.manifest.map_extent);
        let mut session = Session {
            pack,
            config,
            viewport,
            fence: FenceState::default(),
            state: ConnectionState::Splash,
            attempt: 0,
            clock_s: 0.0,
            phase_start_s: 0.0,
            last_fix: None,
            last_fix_s: None,
            out_of_range: false,
            log: Vec::new(),
        };
        session.emit(GuideEvent::ConnectionChanged {
            state: ConnectionState::Splash,
            attempt: 0,
        });
        Ok(session)
    }

    pub fn state(&self) -> ConnectionState {
        self.state
    }

    pub fn attempt(&self) -> u8 {
        self.attempt
    }

    pub fn viewport(&self) -> &Viewport {
        &self.viewport
    }

    pub fn fence(&self) -> &FenceState {
        &self.fence
    }

    pub fn pack(&self) -> &Arc<ContentPack> {
        &self.pack
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn clock_s(&self) -> f64 {
        self.clock_s
    }

    pub fn last_fix(&self) -> Option<&GeoFix> {
        self.last_fix.as_ref()
    }

    /// The last usable fix fell outside the zoo and the map is frozen.
    pub fn is_out_of_range(&self) -> bool {
        self.out_of_range
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn is_closed(&self) -> bool {
        self.state == ConnectionState::Exited
    }

    /// The event log as JSON lines.
    pub fn export_log(&self) -> String {
        let mut out = String::new();
        for entry in &self.log {
            out.push_str(&serde_json::to_string(entry).expect("log entries serialize"));
            out.push('\n');
        }
        out
    }

    fn emit(&mut self, event: GuideEvent) -> GuideEvent {
        self.log.push(LogEntry {
            seq: self.log.len() as u64 + 1,
            elapsed_s: self.clock_s,
            event: event.clone(),
        });
        event
    }

    fn transition(&mut self, state: ConnectionState) -> GuideEvent {
        self.state = state;
        self.emit(GuideEvent::ConnectionChanged {
            state,
            attempt: self.attempt,
        })
    }

    /// Enters Failed, and Exited right after it once the restart is spent.
    fn fail(&mut self, events: &mut Vec<GuideEvent>) {
        events.push(self.transition(ConnectionState::Failed));
        if self.attempt >= 2 {
            events.push(self.transition(ConnectionState::Exited));
        }
    }

    /// Advances the clock to `elapsed_s` (never backwards) and applies any
    /// timeouts that have come due.
    pub fn on_tick(&mut self, elapsed_s: f64) -> Vec<GuideEvent> {
        if elapsed_s.is_finite() && elapsed_s > self.clock_s {
            self.clock_s = elapsed_s;
        }
        let mut events = Vec::new();
        loop {
            let now = self.clock_s;
            match self.state {
                ConnectionState::Splash if now >= self.config.splash_seconds => {
                    self.attempt = 1;
                    self.phase_start_s = self.config.splash_seconds;
                    events.push(self.transition(ConnectionState::Connecting));
                }
                ConnectionState::Connecting | ConnectionState::Lost
                    if now - self.phase_start_s >= self.config.connect_timeout_s =>
                {
                    self.fail(&mut events);
                }
                ConnectionState::Connected => {
                    let last = self.last_fix_s.unwrap_or(self.phase_start_s);
                    if now - last < self.config.fix_gap_s {
                        break;
                    }
                    self.phase_start_s = last + self.config.fix_gap_s;
                    events.push(self.transition(ConnectionState::Lost));
                }
                _ => break,
            }
        }
        events
    }

    pub fn restart(&mut self) -> Result<GuideEvent, EngineError> {
        match (self.state, self.attempt) {
            (ConnectionState::Exited, _) => Err(EngineError::SessionClosed),
            (ConnectionState::Failed, 1) => {
                self.attempt = 2;
                self.phase_start_s = self.clock_s;
                Ok(self.transition(ConnectionState::Connecting))
            }
            (state, attempt) => Err(EngineError::InvalidState { state, attempt }),
        }
    }

    /// Takes one receiver fix at the current clock.
    pub fn on_fix(&mut self, fix: &GeoFix) -> Vec<GuideEvent> {
        let Some(position) = fix.position() else {
            return Vec::new();
        };
        let mut events = Vec::new();
        match self.state {
            ConnectionState::Splash | ConnectionState::Failed | ConnectionState::Exited => return events,
            ConnectionState::Connecting | ConnectionState::Lost => {
                events.push(self.transition(ConnectionState::Connected));
            }
            ConnectionState::Connected => {}
        }
        self.last_fix = Some(fix.clone());
        self.last_fix_s = Some(self.clock_s);

        if !in_zoo_range(position, self.pack.bounds()) {
            self.out_of_range = true;
            events.push(self.emit(GuideEvent::OutOfRange { fix: fix.clone() }));
            return events;
        }
        self.out_of_range = false;
        let pixel = self.pack.calibration.geo_to_pixel(position);
        self.viewport = self.viewport.center_on(pixel);
        events.push(self.emit(GuideEvent::FixAccepted {
            fix: fix.clone(),
            pixel,
            in_range: true,
        }));

        let (fence, transitions) =
            geofence::update(&self.fence, &self.pack.hotspots, position, self.config.exit_buffer_m);
        self.fence = fence;
        for transition in transitions {
            let event = match transition {
                FenceEvent::Entered(id) => {
                    let record = content::get_content(&self.pack, &id)
                        .expect("pack load guarantees every hotspot resolves to content");
                    GuideEvent::HotspotEntered {
                        content: ContentSummary {
                            content_id: record.id.clone(),
                            name: record.name.clone(),
                            species: record.species.clone(),
                        },
                        id,
                    }
                }
                FenceEvent::Exited(id) => GuideEvent::HotspotExited { id },
            };
            events.push(self.emit(event));
        }
        events
    }

    pub fn zoom_step(&mut self, direction: i32) -> Result<&Viewport, EngineError> {
        if self.is_closed() {
            return Err(EngineError::SessionClosed);
        }
        self.viewport = self.viewport.zoom_step(direction);
        Ok(&self.viewport)
    }

    pub fn menu_action(&mut self, action: &MenuAction) -> Result<MenuResponse, EngineError> {
        if self.is_closed() {
            return Err(EngineError::SessionClosed);
        }
        if self.state != ConnectionState::Connected && !action.allowed_when_not_connected() {
            return Err(EngineError::NotReady(self.state));
        }
        let response = match action {
            MenuAction::CheckConnection => MenuResponse::Connection {
                state: self.state,
                attempt: self.attempt,
                seconds_since_fix: self.last_fix_s.map(|t| self.clock_s - t),
            },
            MenuAction::ShowCoordinates => {
                let position = self
                    .last_fix
                    .as_ref()
                    .and_then(GeoFix::position)
                    .ok_or(EngineError::NotReady(self.state))?;
                MenuResponse::Coordinates {
                    text: format_coordinates(position),
                    latitude: position.lat,
                    longitude: position.lon,
                }
            }
            MenuAction::TourGuide => {
                let position = self
                    .last_fix
                    .as_ref()
                    .and_then(GeoFix::position)
                    .ok_or(EngineError::NotReady(self.state))?;
                let nearest = geofence::nearest_hotspots(&self.pack.hotspots, position, self.config.tour_guide_k)
                    .into_iter()
                    .map(|(id, distance_m)| TourStop {
                        name: self.pack.hotspot(&id).map(|h| h.name.clone()).unwrap_or_default(),
                        id,
                        distance_m,
                    })
                    .collect();
                MenuResponse::TourGuide { nearest }
            }
            MenuAction::Search { query } => MenuResponse::Search {
                results: content::search(&self.pack, query).into_iter().cloned().collect(),
            },
            MenuAction::Events { from, to } => {
                if from > to {
                    return Err(EngineError::InvalidRequest("events window needs from <= to".into()));
                }
                MenuResponse::Events {
                    events: content::events_between(&self.pack, *from, *to).into_iter().cloned().collect(),
                }
            }
            MenuAction::Close => {
                self.transition(ConnectionState::Exited);
                MenuResponse::Closed
            }
        };
        Ok(response)
    }
}

impl FixSink for Session {
    fn on_clock(&mut self, elapsed_s: f64) {
        self.on_tick(elapsed_s);
    }

    fn on_sentence(&mut self, _elapsed_s: f64, parsed: &Result<ParsedSentence, NmeaError>) {
        if let Ok(sentence) = parsed {
            if let Some(fix) = sentence.fix() {
                self.on_fix(fix);
            }
        }
    }
}

//! Location-aware zoo tour guide engine.
//!
//! The crate turns a stream of NMEA-0183 sentences into tour events: fixes are
//! georeferenced onto a raster zoo map, the map viewport is panned so the
//! visitor stays under a screen-centered cursor, and circular or polygonal
//! hotspots fire content events with an exit hysteresis band.
//!
//! Module map:
//!
//! - [`nmea`]: GGA/RMC parsing and GGA emission.
//! - [`geo`]: haversine distance and the affine degrees-to-pixels calibration.
//! - [`geofence`]: hotspot containment and enter/exit transitions.
//! - [`viewport`]: pan/zoom state and the zoo range check.
//! - [`content`]: the on-disk content pack and its queries.
//! - [`simulator`]: scripted walks standing in for a receiver.
//! - [`engine`]: the session state machine and menu.
//! - [`wire`]: the versioned stream protocol and a transport-free session host.

pub mod content;
pub mod engine;
pub mod geo;
pub mod geofence;
pub mod nmea;
pub mod simulator;
pub mod viewport;
pub mod wire;

pub use content::{AnimalRecord, ContentPack, EventRecord, PackError};
pub use engine::{ConnectionState, GuideEvent, LogEntry, MenuAction, MenuResponse, Session, SessionConfig};
pub use geo::{GeoPoint, MapCalibration, PixelPoint};
pub use geofence::{FenceEvent, FenceState, Geometry, Hotspot};
pub use nmea::{FixQuality, GeoFix, NmeaError, ParsedSentence};
pub use simulator::{FixStream, WalkScript};
pub use viewport::{ScreenPoint, Viewport, ZooBounds};

//! The content pack: a directory standing in for the guide's relational store.
//!
//! ```text
//! <pack>/
//!   manifest.json     pack metadata, map raster, zoo bounds, cached calibration
//!   animals.jsonl     one AnimalRecord per line
//!   hotspots.jsonl    one Hotspot per line
//!   events.jsonl      one EventRecord per line (daily timetable, "HH:MM")
//!   calibration.csv   control points: lat,lon,x_px,y_px
//!   map/, media/      assets referenced by path
//! ```
//!
//! The schema is a reconstruction; relational constraints (unique slugs,
//! foreign keys between tables) are enforced when the pack is loaded. Loading
//! collects every violation rather than stopping at the first, so that a
//! validator can report them all.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Component, Path, PathBuf};

use chrono::NaiveTime;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{fit_affine, AffineCoefficients, ControlPoint, GeoPoint, MapCalibration, PixelPoint};
use crate::geofence::Hotspot;
use crate::viewport::{Extent, ZooBounds};

pub const FORMAT_VERSION: u64 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ANIMALS_FILE: &str = "animals.jsonl";
pub const HOTSPOTS_FILE: &str = "hotspots.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const CALIBRATION_FILE: &str = "calibration.csv";

/// Relative tolerance between cached and re-fitted calibration coefficients.
pub const CALIBRATION_TOLERANCE: f64 = 1e-6;

/// Where in the pack a problem was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Locator {
    pub file: String,
    pub line: Option<usize>,
    pub record: Option<String>,
}

impl Locator {
    fn file(file: &str) -> Self {
        Locator {
            file: file.to_string(),
            line: None,
            record: None,
        }
    }

    fn line(file: &str, line: usize) -> Self {
        Locator {
            line: Some(line),
            ..Self::file(file)
        }
    }

    fn record(file: &str, line: usize, record: &str) -> Self {
        Locator {
            record: Some(record.to_string()),
            ..Self::line(file, line)
        }
    }
}

impl fmt::Display for Locator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.file)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(record) = &self.record {
            write!(f, " [{record}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PackError {
    #[error("{locator}: cannot read pack: {message}")]
    Io { locator: Locator, message: String },
    #[error("{locator}: missing file {path}")]
    MissingFile { locator: Locator, path: String },
    #[error("{locator}: {message}")]
    SchemaViolation { locator: Locator, message: String },
    #[error("{locator}: {field} references unknown id {id:?}")]
    BrokenReference {
        locator: Locator,
        field: &'static str,
        id: String,
    },
    #[error("{locator}: cached coefficient {coefficient} = {cached} but control points fit {fitted}")]
    CalibrationMismatch {
        locator: Locator,
        coefficient: &'static str,
        cached: f64,
        fitted: f64,
    },
    #[error("{locator}: unsupported format_version {found}")]
    UnsupportedVersion { locator: Locator, found: String },
}

impl PackError {
    pub fn locator(&self) -> &Locator {
        match self {
            PackError::Io { locator, .. }
            | PackError::MissingFile { locator, .. }
            | PackError::SchemaViolation { locator, .. }
            | PackError::BrokenReference { locator, .. }
            | PackError::CalibrationMismatch { locator, .. }
            | PackError::UnsupportedVersion { locator, .. } => locator,
        }
    }

    /// The pack could not be read at all (as opposed to being invalid).
    pub fn is_io(&self) -> bool {
        matches!(self, PackError::Io { .. })
    }

    fn schema(locator: Locator, message: impl Into<String>) -> Self {
        PackError::SchemaViolation {
            locator,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContentError {
    #[error("unknown hotspot {0:?}")]
    UnknownHotspot(String),
}

/// Calibration as cached in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBlock {
    #[serde(flatten)]
    pub coefficients: AffineCoefficients,
    pub rms_residual: f64,
}

impl From<&MapCalibration> for CalibrationBlock {
    fn from(cal: &MapCalibration) -> Self {
        CalibrationBlock {
            coefficients: cal.coefficients,
            rms_residual: cal.rms_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u64,
    pub name: String,
    pub version: String,
    /// Pack-relative path of the background raster.
    pub map_image: String,
    pub map_extent: Extent,
    pub bounds: ZooBounds,
    pub calibration: CalibrationBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Image,
    Audio,
    Video,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaRef {
    pub kind: MediaKind,
    /// Pack-relative, `/`-separated.
    pub path: String,
    #[serde(default)]
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnimalRecord {
    pub id: String,
    pub name: String,
    pub species: String,
    pub description: String,
    #[serde(default)]
    pub media: Vec<MediaRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub location_hotspot_id: Option<String>,
    #[serde(with = "time_of_day")]
    pub start: NaiveTime,
    #[serde(with = "time_of_day")]
    pub end: NaiveTime,
}

/// Local time of day as `HH:MM` (seconds accepted on input).
pub mod time_of_day {
    use chrono::NaiveTime;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn parse(text: &str) -> Option<NaiveTime> {
        NaiveTime::parse_from_str(text, "%H:%M")
            .or_else(|_| NaiveTime::parse_from_str(text, "%H:%M:%S"))
            .ok()
    }

    pub fn format(time: &NaiveTime) -> String {
        time.format("%H:%M").to_string()
    }

    pub fn serialize<S: Serializer>(time: &NaiveTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(time))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveTime, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).ok_or_else(|| serde::de::Error::custom(format!("invalid time of day {text:?}, expected HH:MM")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContentPack {
    pub root: PathBuf,
    pub manifest: Manifest,
    /// Re-fitted from `calibration.csv`; agrees with the cached block.
    pub calibration: MapCalibration,
    pub animals: Vec<AnimalRecord>,
    pub hotspots: Vec<Hotspot>,
    pub events: Vec<EventRecord>,
}

impl ContentPack {
    pub fn animal(&self, id: &str) -> Option<&AnimalRecord> {
        self.animals.iter().find(|a| a.id == id)
    }

    pub fn hotspot(&self, id: &str) -> Option<&Hotspot> {
        self.hotspots.iter().find(|h| h.id == id)
    }

    pub fn bounds(&self) -> &ZooBounds {
        &self.manifest.bounds
    }
}

/// Outcome of inspecting a pack directory: every finding, plus the pack when
/// there were none.
#[derive(Debug, Clone)]
pub struct PackReport {
    pub pack: Option<ContentPack>,
    pub findings: Vec<PackError>,
}

pub fn load_pack(root: impl AsRef<Path>) -> Result<ContentPack, PackError> {
    let report = inspect_pack(root);
    match report.pack {
        Some(pack) => Ok(pack),
        None => Err(report
            .findings
            .into_iter()
            .next()
            .expect("a pack is withheld only when there are findings")),
    }
}

pub fn is_slug(text: &str) -> bool {
    !text.is_empty()
        && !text.starts_with('-')
        && !text.ends_with('-')
        && text.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

fn check_relative_path(path: &str) -> Result<(), String> {
    if path.is_empty() {
        return Err("empty media path".into());
    }
    if path.contains('\\') {
        return Err(format!("path {path:?} must use '/' separators"));
    }
    let p = Path::new(path);
    if p.is_absolute() || path.starts_with('/') {
        return Err(format!("path {path:?} must be pack-relative"));
    }
    if p.components().any(|c| !matches!(c, Component::Normal(_) | Component::CurDir)) {
        return Err(format!("path {path:?} escapes the pack"));
    }
    Ok(())
}

struct Inspector<'a> {
    root: &'a Path,
    findings: Vec<PackError>,
}

impl Inspector<'_> {
    fn read(&mut self, file: &str) -> Option<String> {
        let path = self.root.join(file);
        match fs::read_to_string(&path) {
            Ok(text) => Some(text),
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => {
                self.findings.push(PackError::MissingFile {
                    locator: Locator::file(file),
                    path: file.to_string(),
                });
                None
            }
            Err(err) => {
                self.findings.push(PackError::Io {
                    locator: Locator::file(file),
                    message: err.to_string(),
                });
                None
            }
        }
    }

    /// Parses a JSON-lines table, returning `(line number, record)` pairs.
    fn table<T: DeserializeOwned>(&mut self, file: &str) -> Option<Vec<(usize, T)>> {
        let text = self.read(file)?;
        let mut rows = Vec::new();
        for (index, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<T>(line) {
                Ok(record) => rows.push((index + 1, record)),
                Err(err) => self.findings.push(PackError::schema(Locator::line(file, index + 1), err.to_string())),
            }
        }
        Some(rows)
    }

    fn check_ids<'r, I>(&mut self, file: &str, ids: I)
    where
        I: IntoIterator<Item = (usize, &'r str)>,
    {
        let mut seen = HashSet::new();
        for (line, id) in ids {
            if !is_slug(id) {
                self.findings.push(PackError::schema(
                    Locator::record(file, line, id),
                    format!("id {id:?} is not a slug (lowercase alphanumerics and hyphens)"),
                ));
            } else if !seen.insert(id.to_string()) {
                self.findings.push(PackError::schema(
                    Locator::record(file, line, id),
                    format!("duplicate id {id:?}"),
                ));
            }
        }
    }

    fn check_asset(&mut self, locator: Locator, path: &str) {
        if let Err(message) = check_relative_path(path) {
            self.findings.push(PackError::schema(locator, message));
        } else if !self.root.join(path).is_file() {
            self.findings.push(PackError::MissingFile {
                locator,
                path: path.to_string(),
            });
        }
    }

    fn manifest(&mut self) -> Option<Manifest> {
        let text = self.read(MANIFEST_FILE)?;
        let value: serde_json::Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(err) => {
                self.findings.push(PackError::schema(
                    Locator::line(MANIFEST_FILE, err.line()),
                    err.to_string(),
                ));
                return None;
            }
        };
        match value.get("format_version") {
            Some(v) if v.as_u64() == Some(FORMAT_VERSION) => {}
            Some(v) => {
                self.findings.push(PackError::UnsupportedVersion {
                    locator: Locator::file(MANIFEST_FILE),
                    found: v.to_string(),
                });
                return None;
            }
            None => {
                self.findings
                    .push(PackError::schema(Locator::file(MANIFEST_FILE), "missing field `format_version`"));
                return None;
            }
        }
        let manifest: Manifest = match serde_json::from_value(value) {
            Ok(m) => m,
            Err(err) => {
                self.findings.push(PackError::schema(Locator::file(MANIFEST_FILE), err.to_string()));
                return None;
            }
        };
        let locator = || Locator::record(MANIFEST_FILE, 1, &manifest.name);
        if !manifest.map_extent.is_valid() {
            self.findings.push(PackError::schema(locator(), "map_extent must be positive"));
        }
        if let Err(message) = manifest.bounds.validate() {
            self.findings.push(PackError::schema(locator(), message));
        }
        self.check_asset(locator(), &manifest.map_image);
        Some(manifest)
    }

    fn control_points(&mut self, bounds: Option<&ZooBounds>) -> Option<Vec<ControlPoint>> {
        let text = self.read(CALIBRATION_FILE)?;
        let mut points = Vec::new();
        let mut clean = true;
        for (line, row) in parse_control_points(&text) {
            let point = match row {
                Ok(point) => point,
                Err(message) => {
                    clean = false;
                    self.findings.push(PackError::schema(Locator::line(CALIBRATION_FILE, line), message));
                    continue;
                }
            };
            if let Some(bounds) = bounds {
                if !bounds.contains_strict(point.geo) {
                    self.findings.push(PackError::schema(
                        Locator::line(CALIBRATION_FILE, line),
                        format!(
                            "control point ({}, {}) lies outside the zoo bounds",
                            point.geo.lat, point.geo.lon
                        ),
                    ));
                }
            }
            points.push(point);
        }
        clean.then_some(points)
    }
}

/// Reads a `lat,lon,x_px,y_px` control point table (with header row).
///
/// Each row comes back with its 1-based line number.
pub fn parse_control_points(text: &str) -> Vec<(usize, Result<ControlPoint, String>)> {
    #[derive(Deserialize)]
    struct Row {
        lat: f64,
        lon: f64,
        x_px: f64,
        y_px: f64,
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    reader
        .deserialize::<Row>()
        .enumerate()
        .map(|(index, row)| {
            // header is line 1
            let line = index + 2;
            let row = row.map_err(|e| e.to_string()).and_then(|row| {
                let geo = GeoPoint::new(row.lat, row.lon);
                let pixel = PixelPoint::new(row.x_px, row.y_px);
                if geo.is_valid() && pixel.x.is_finite() && pixel.y.is_finite() {
                    Ok(ControlPoint { geo, pixel })
                } else {
                    Err("control point out of range".to_string())
                }
            });
            (line, row)
        })
        .collect()
}

/// Reads and validates a pack, collecting all findings.
pub fn inspect_pack(root: impl AsRef<Path>) -> PackReport {
    let root = root.as_ref();
    if !root.is_dir() {
        return PackReport {
            pack: None,
            findings: vec![PackError::Io {
                locator: Locator::file(&root.display().to_string()),
                message: "not a directory".into(),
            }],
        };
    }
    let mut ins = Inspector {
        root,
        findings: Vec::new(),
    };

    let manifest = ins.manifest();
    let animals = ins.table::<AnimalRecord>(ANIMALS_FILE);
    let hotspots = ins.table::<Hotspot>(HOTSPOTS_FILE);
    let events = ins.table::<EventRecord>(EVENTS_FILE);
    let control_points = ins.control_points(manifest.as_ref().map(|m| &m.bounds));

    let animal_ids: HashSet<&str> = animals.iter().flatten().map(|(_, a)| a.id.as_str()).collect();
    let hotspot_ids: HashSet<&str> = hotspots.iter().flatten().map(|(_, h)| h.id.as_str()).collect();

    if let Some(rows) = &animals {
        ins.check_ids(ANIMALS_FILE, rows.iter().map(|(l, a)| (*l, a.id.as_str())));
        for (line, animal) in rows {
            for media in &animal.media {
                ins.check_asset(Locator::record(ANIMALS_FILE, *line, &animal.id), &media.path);
            }
        }
    }
    if let Some(rows) = &hotspots {
        ins.check_ids(HOTSPOTS_FILE, rows.iter().map(|(l, h)| (*l, h.id.as_str())));
        for (line, hotspot) in rows {
            let locator = Locator::record(HOTSPOTS_FILE, *line, &hotspot.id);
            if let Err(message) = hotspot.geometry.validate() {
                ins.findings.push(PackError::schema(locator.clone(), message));
            }
            if animals.is_some() && !animal_ids.contains(hotspot.content_id.as_str()) {
                ins.findings.push(PackError::BrokenReference {
                    locator,
                    field: "content_id",
                    id: hotspot.content_id.clone(),
                });
            }
        }
    }
    if let Some(rows) = &events {
        ins.check_ids(EVENTS_FILE, rows.iter().map(|(l, e)| (*l, e.id.as_str())));
        for (line, event) in rows {
            let locator = Locator::record(EVENTS_FILE, *line, &event.id);
            if event.end <= event.start {
                ins.findings.push(PackError::schema(
                    locator.clone(),
                    format!(
                        "end {} must be after start {}",
                        time_of_day::format(&event.end),
                        time_of_day::format(&event.start)
                    ),
                ));
            }
            if let Some(spot) = &event.location_hotspot_id {
                if hotspots.is_some() && !hotspot_ids.contains(spot.as_str()) {
                    ins.findings.push(PackError::BrokenReference {
                        locator,
                        field: "location_hotspot_id",
                        id: spot.clone(),
                    });
                }
            }
        }
    }

    let mut calibration = None;
    if let Some(points) = control_points {
        match fit_affine(&points) {
            Ok(fitted) => {
                if let Some(manifest) = &manifest {
                    let cached = manifest.calibration.coefficients.as_array();
                    let names = ["a", "b", "c", "d", "e", "f"];
                    for ((name, cached), fitted) in names.iter().zip(cached).zip(fitted.coefficients.as_array()) {
                        if (cached - fitted).abs() > CALIBRATION_TOLERANCE * fitted.abs().max(1.0) || !cached.is_finite() {
                            ins.findings.push(PackError::CalibrationMismatch {
                                locator: Locator::file(MANIFEST_FILE),
                                coefficient: name,
                                cached,
                                fitted,
                            });
                        }
                    }
                }
                calibration = Some(fitted);
            }
            Err(err) => ins
                .findings
                .push(PackError::schema(Locator::file(CALIBRATION_FILE), err.to_string())),
        }
    }

    let findings = ins.findings;
    let pack = match (findings.is_empty(), manifest, calibration, animals, hotspots, events) {
        (true, Some(manifest), Some(calibration), Some(animals), Some(hotspots), Some(events)) => Some(ContentPack {
            root: root.to_path_buf(),
            manifest,
            calibration,
            animals: animals.into_iter().map(|(_, r)| r).collect(),
            hotspots: hotspots.into_iter().map(|(_, r)| r).collect(),
            events: events.into_iter().map(|(_, r)| r).collect(),
        }),
        _ => None,
    };
    PackReport { pack, findings }
}

/// Case-insensitive substring search over name, species and description.
///
/// Results are ordered by the best matching field (name, then species, then
/// description) and then by id. An empty query matches nothing.
pub fn search<'p>(pack: &'p ContentPack, query: &str) -> Vec<&'p AnimalRecord> {
    if query.is_empty() {
        return Vec::new();
    }
    let needle = query.to_lowercase();
    let mut hits: Vec<(u8, &AnimalRecord)> = pack
        .animals
        .iter()
        .filter_map(|animal| {
            [&animal.name, &animal.species, &animal.description]
                .iter()
                .position(|field| field.to_lowercase().contains(&needle))
                .map(|rank| (rank as u8, animal))
        })
        .collect();
    hits.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    hits.into_iter().map(|(_, a)| a).collect()
}

/// Events overlapping `[from, to]`: `start < to && end > from`, ordered by
/// start then id.
pub fn events_between(pack: &ContentPack, from: NaiveTime, to: NaiveTime) -> Vec<&EventRecord> {
    let mut hits: Vec<&EventRecord> = pack.events.iter().filter(|e| e.start < to && e.end > from).collect();
    hits.sort_by(|a, b| a.start.cmp(&b.start).then_with(|| a.id.cmp(&b.id)));
    hits
}

/// Resolves a hotspot to the animal record it presents.
pub fn get_content<'p>(pack: &'p ContentPack, hotspot_id: &str) -> Result<&'p AnimalRecord, ContentError> {
    pack.hotspot(hotspot_id)
        .and_then(|h| pack.animal(&h.content_id))
        .ok_or_else(|| ContentError::UnknownHotspot(hotspot_id.to_string()))
}

/// Count of records per table, for reports.
pub fn table_sizes(pack: &ContentPack) -> BTreeMap<&'static str, usize> {
    BTreeMap::from([
        ("animals", pack.animals.len()),
        ("hotspots", pack.hotspots.len()),
        ("events", pack.events.len()),
        ("control_points", pack.calibration.control_points.len()),
    ])
}

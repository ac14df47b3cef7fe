//! Simulated GPS receiver.
//!
//! A [`WalkScript`] describes a walk through the zoo; [`build_walk`] turns it
//! into a [`FixStream`] of NMEA sentences sampled on a fixed clock, with
//! Gaussian position noise and scripted fault windows. Randomness comes from
//! `ChaCha8Rng::seed_from_u64(seed)`: position noise draws two standard
//! normals (east, north) per clock step, fault payloads use a second stream
//! seeded with `seed ^ GARBAGE_STREAM_SALT`.

use std::thread;
use std::time::{Duration, Instant};

use chrono::{NaiveTime, TimeDelta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine_m, GeoPoint, LocalFrame};
use crate::nmea::{self, format_gga, GeoFix, NmeaError, ParsedSentence};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 1.0;
pub const WALKING_SPEED_MPS: f64 = 1.4;
pub const GARBAGE_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid walk script{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    ScriptInvalid { line: Option<usize>, message: String },
}

impl SimError {
    fn invalid(message: impl Into<String>) -> Self {
        SimError::ScriptInvalid {
            line: None,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Receiver sends nothing.
    Silence,
    /// GGA sentences with quality 0.
    NoFixQuality,
    /// Line noise: random bytes.
    GarbageBytes,
}

/// Fault active for clock times `start_s <= t < end_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultWindow {
    pub start_s: f64,
    pub end_s: f64,
    pub kind: FaultKind,
}

impl FaultWindow {
    pub fn covers(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkScript {
    pub waypoints: Vec<GeoPoint>,
    pub speed_mps: f64,
    pub sample_rate_hz: f64,
    pub noise_sigma_m: f64,
    pub seed: u64,
    pub faults: Vec<FaultWindow>,
    /// UTC time of the first sample.
    pub start_time: NaiveTime,
}

impl WalkScript {
    pub fn new(waypoints: Vec<GeoPoint>, speed_mps: f64) -> Self {
        WalkScript {
            waypoints,
            speed_mps,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            noise_sigma_m: 0.0,
            seed: 0,
            faults: Vec::new(),
            start_time: default_start_time(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.waypoints.len() < 2 {
            return Err(SimError::invalid(format!(
                "need at least 2 waypoints, got {}",
                self.waypoints.len()
            )));
        }
        if let Some(p) = self.waypoints.iter().find(|p| !p.is_valid()) {
            return Err(SimError::invalid(format!("waypoint ({}, {}) out of range", p.lat, p.lon)));
        }
        for (i, a) in self.waypoints.iter().enumerate() {
            if self.waypoints[i + 1..].contains(a) {
                return Err(SimError::invalid(format!("waypoint ({}, {}) repeats", a.lat, a.lon)));
            }
        }
        if !(self.speed_mps.is_finite() && self.speed_mps > 0.0) {
            return Err(SimError::invalid("speed must be > 0"));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(SimError::invalid("sample rate must be > 0"));
        }
        if !(self.noise_sigma_m.is_finite() && self.noise_sigma_m >= 0.0) {
            return Err(SimError::invalid("noise sigma must be >= 0"));
        }
        if let Some(w) = self.faults.iter().find(|w| w.start_s.is_nan() || w.end_s.is_nan() || w.start_s >= w.end_s) {
            return Err(SimError::invalid(format!(
                "fault window needs start < end, got {}..{}",
                w.start_s, w.end_s
            )));
        }
        Ok(())
    }

    fn fault_at(&self, t: f64) -> Option<FaultKind> {
        self.faults.iter().find(|w| w.covers(t)).map(|w| w.kind)
    }
}

fn default_start_time() -> NaiveTime {
    NaiveTime::from_hms_opt(10, 0, 0).expect("valid constant time")
}

/// One record of a walk script file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ScriptRecord {
    Walk {
        speed_mps: f64,
        #[serde(default = "default_rate")]
        sample_rate_hz: f64,
        #[serde(default)]
        noise_sigma_m: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_start_time")]
        start_utc: NaiveTime,
    },
    Waypoint {
        lat: f64,
        lon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Fault {
        kind: FaultKind,
        start_s: f64,
        end_s: f64,
    },
}

fn default_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}

/// Parses a walk script: JSON lines with exactly one `walk` header record
/// plus `waypoint` and `fault` records in any order (waypoints in walk order).
pub fn parse_walk_script(text: &str) -> Result<WalkScript, SimError> {
    let mut header = None;
    let mut waypoints = Vec::new();
    let mut faults = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at_line = |message: String| SimError::ScriptInvalid {
            line: Some(index + 1),
            message,
        };
        match serde_json::from_str::<ScriptRecord>(line).map_err(|e| at_line(e.to_string()))? {
            ScriptRecord::Walk {
                speed_mps,
                sample_rate_hz,
                noise_sigma_m,
                seed,
                start_utc,
            } => {
                if header.is_some() {
                    return Err(at_line("more than one walk record".into()));
                }
                header = Some((speed_mps, sample_rate_hz, noise_sigma_m, seed, start_utc));
            }
            ScriptRecord::Waypoint { lat, lon, .. } => waypoints.push(GeoPoint::new(lat, lon)),
            ScriptRecord::Fault { kind, start_s, end_s } => faults.push(FaultWindow { start_s, end_s, kind }),
        }
    }
    let (speed_mps, sample_rate_hz, noise_sigma_m, seed, start_time) =
        header.ok_or_else(|| SimError::invalid("missing walk record"))?;
    let script = WalkScript {
        waypoints,
        speed_mps,
        sample_rate_hz,
        noise_sigma_m,
        seed,
        faults,
        start_time,
    };
    script.validate()?;
    Ok(script)
}

/// Renders a script in the format read by [`parse_walk_script`].
pub fn format_walk_script(script: &WalkScript) -> String {
    let mut records = vec![ScriptRecord::Walk {
        speed_mps: script.speed_mps,
        sample_rate_hz: script.sample_rate_hz,
        noise_sigma_m: script.noise_sigma_m,
        seed: script.seed,
        start_utc: script.start_time,
    }];
    records.extend(script.waypoints.iter().map(|p| ScriptRecord::Waypoint {
        lat: p.lat,
        lon: p.lon,
        label: None,
    }));
    records.extend(script.faults.iter().map(|w| ScriptRecord::Fault {
        kind: w.kind,
        start_s: w.start_s,
        end_s: w.end_s,
    }));
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("script records serialize") + "\n")
        .collect()
}

/// One receiver output at a clock step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamItem {
    /// Clock step; elapsed time is `index / sample_rate_hz`.
    pub index: usize,
    /// Raw bytes as received, without line terminator.
    pub payload: Vec<u8>,
}

/// Receiver output on a fixed clock. Silent steps have no item.
#[derive(Debug, Clone, PartialEq)]
pub struct FixStream {
    pub sample_rate_hz: f64,
    /// Number of clock steps, silent ones included.
    pub steps: usize,
    pub items: Vec<StreamItem>,
}

impl FixStream {
    pub fn elapsed_s(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.elapsed_s(self.steps.saturating_sub(1))
    }

    /// One payload per line, CR LF terminated.
    pub fn to_nmea_log(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for item in &self.items {
            out.extend_from_slice(&item.payload);
            out.extend_from_slice(b"\r\n");
        }
        out
    }

    /// Reads a log with one sentence per line, one clock step per line.
    pub fn from_nmea_log(bytes: &[u8], sample_rate_hz: f64) -> FixStream {
        let items: Vec<StreamItem> = bytes
            .split(|&b| b == b'\n')
            .map(|line| line.strip_suffix(b"\r").unwrap_or(line))
            .filter(|line| !line.is_empty())
            .enumerate()
            .map(|(index, line)| StreamItem {
                index,
                payload: line.to_vec(),
            })
            .collect();
        FixStream {
            sample_rate_hz,
            steps: items.len(),
            items,
        }
    }
}

/// Position at arc length `distance_m` along a polyline, interpolating
/// linearly in degrees within each leg.
fn point_along(waypoints: &[GeoPoint], cumulative: &[f64], distance_m: f64) -> GeoPoint {
    let leg = cumulative
        .windows(2)
        .position(|w| distance_m <= w[1])
        .unwrap_or(cumulative.len() - 2);
    let (start, end) = (waypoints[leg], waypoints[leg + 1]);
    let length = cumulative[leg + 1] - cumulative[leg];
    let t = if length > 0.0 {
        ((distance_m - cumulative[leg]) / length).clamp(0.0, 1.0)
    } else {
        0.0
    };
    GeoPoint::new(start.lat + (end.lat - start.lat) * t, start.lon + (end.lon - start.lon) * t)
}

fn perturb(rng: &mut ChaCha8Rng, p: GeoPoint, sigma_m: f64) -> GeoPoint {
    let east: f64 = StandardNormal.sample(rng);
    let north: f64 = StandardNormal.sample(rng);
    if sigma_m == 0.0 {
        return p;
    }
    LocalFrame::new(p).to_geo(east * sigma_m, north * sigma_m)
}

fn garbage_line(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let len = rng.random_range(16..=82);
    let mut bytes: Vec<u8> = (0..len)
        .map(|_| loop {
            let b: u8 = rng.random();
            if b != b'\r' && b != b'\n' {
                break b;
            }
        })
        .collect();
    if bytes[0] == b'$' {
        bytes[0] = b'#';
    }
    bytes
}

fn time_after(start: NaiveTime, elapsed_s: f64) -> NaiveTime {
    let delta = TimeDelta::nanoseconds((elapsed_s * 1e9).round() as i64);
    start.overflowing_add_signed(delta).0
}

fn simulated_fix(p: GeoPoint, time: NaiveTime) -> GeoFix {
    GeoFix {
        altitude_m: Some(30.0),
        ..GeoFix::new(p.lat, p.lon, time)
    }
}

fn sentence_bytes(fix: &GeoFix) -> Vec<u8> {
    let mut line = format_gga(fix).into_bytes();
    line.truncate(line.len() - 2);
    line
}

/// Samples the walk on its clock, applying noise and fault windows.
pub fn build_walk(script: &WalkScript) -> Result<FixStream, SimError> {
    script.validate()?;
    let mut cumulative = vec![0.0];
    for leg in script.waypoints.windows(2) {
        cumulative.push(cumulative.last().unwrap() + haversine_m(leg[0], leg[1]));
    }
    let total = *cumulative.last().unwrap();
    let step_m = script.speed_mps / script.sample_rate_hz;
    let steps = (total / step_m + 1e-9).floor() as usize + 1;

    let mut noise_rng = ChaCha8Rng::seed_from_u64(script.seed);
    let mut garbage_rng = ChaCha8Rng::seed_from_u64(script.seed ^ GARBAGE_STREAM_SALT);
    let mut items = Vec::with_capacity(steps);
    for index in 0..steps {
        let elapsed = index as f64 / script.sample_rate_hz;
        let truth = point_along(&script.waypoints, &cumulative, index as f64 * step_m);
        let observed = perturb(&mut noise_rng, truth, script.noise_sigma_m);
        let time = time_after(script.start_time, elapsed);
        let payload = match script.fault_at(elapsed) {
            Some(FaultKind::Silence) => continue,
            Some(FaultKind::NoFixQuality) => sentence_bytes(&GeoFix::no_fix(Some(time))),
            Some(FaultKind::GarbageBytes) => garbage_line(&mut garbage_rng),
            None => sentence_bytes(&simulated_fix(observed, time)),
        };
        items.push(StreamItem { index, payload });
    }
    Ok(FixStream {
        sample_rate_hz: script.sample_rate_hz,
        steps,
        items,
    })
}

/// Consumer of a replayed stream.
pub trait FixSink {
    /// Called once per clock step, before that step's sentence (if any).
    fn on_clock(&mut self, _elapsed_s: f64) {}
    fn on_sentence(&mut self, elapsed_s: f64, parsed: &Result<ParsedSentence, NmeaError>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pacing {
    #[default]
    AsFastAsPossible,
    RealTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReplaySummary {
    /// Sentences carrying a usable fix.
    pub delivered: usize,
    /// Well-formed sentences without a usable fix.
    pub dropped: usize,
    /// Lines the parser rejected.
    pub garbage: usize,
}

/// Feeds a stream to `sink` in clock order.
pub fn replay(stream: &FixStream, sink: &mut dyn FixSink, pacing: Pacing) -> ReplaySummary {
    let mut summary = ReplaySummary::default();
    let started = Instant::now();
    let mut items = stream.items.iter().peekable();
    for step in 0..stream.steps {
        let elapsed = stream.elapsed_s(step);
        if pacing == Pacing::RealTime {
            let due = Duration::from_secs_f64(elapsed);
            if let Some(wait) = due.checked_sub(started.elapsed()) {
                thread::sleep(wait);
            }
        }
        sink.on_clock(elapsed);
        while let Some(item) = items.next_if(|item| item.index == step) {
            let parsed = nmea::parse_bytes(&item.payload);
            match &parsed {
                Ok(sentence) if sentence.fix().and_then(|f| f.position()).is_some() => summary.delivered += 1,
                Ok(_) => summary.dropped += 1,
                Err(_) => summary.garbage += 1,
            }
            sink.on_sentence(elapsed, &parsed);
        }
    }
    summary
}

/// A simulated visitor walking towards operator-chosen targets.
#[derive(Debug, Clone)]
pub struct SteerableWalker {
    position: GeoPoint,
    targets: Vec<GeoPoint>,
    speed_mps: f64,
    noise_sigma_m: f64,
    start_time: NaiveTime,
    rng: ChaCha8Rng,
}

impl SteerableWalker {
    pub fn new(start: GeoPoint, speed_mps: f64, noise_sigma_m: f64, seed: u64) -> Self {
        SteerableWalker {
            position: start,
            targets: Vec::new(),
            speed_mps,
            noise_sigma_m,
            start_time: default_start_time(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn position(&self) -> GeoPoint {
        self.position
    }

    /// Replaces any pending route with a walk to `target`.
    pub fn steer_to(&mut self, target: GeoPoint) {
        self.targets = vec![target];
    }

    pub fn is_idle(&self) -> bool {
        self.targets.is_empty()
    }

    /// Moves for `dt_s` seconds and returns the sentence the receiver would
    /// emit at clock time `elapsed_s`.
    pub fn step(&mut self, dt_s: f64, elapsed_s: f64) -> Vec<u8> {
        let mut budget = self.speed_mps * dt_s;
        while budget > 0.0 {
            let Some(&target) = self.targets.first() else { break };
            let frame = LocalFrame::new(self.position);
            let (east, north) = frame.to_local(target);
            let remaining = east.hypot(north);
            if remaining <= budget {
                self.position = target;
                self.targets.remove(0);
                budget -= remaining;
            } else {
                let k = budget / remaining;
                self.position = frame.to_geo(east * k, north * k);
                budget = 0.0;
            }
        }
        let observed = perturb(&mut self.rng, self.position, self.noise_sigma_m);
        sentence_bytes(&simulated_fix(observed, time_after(self.start_time, elapsed_s)))
    }
}

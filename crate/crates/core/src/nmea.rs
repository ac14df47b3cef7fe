//! NMEA-0183 sentence parsing (GGA, RMC) and GGA emission.
//!
//! Input is read tolerantly: trailing CR/LF is optional, any two-letter talker
//! is accepted and unknown sentence types pass through as
//! [`ParsedSentence::Unsupported`]. Output is strict: `$GPGGA`, minutes with
//! four decimals, uppercase checksum, CR LF terminator.

use std::fmt::Write as _;

use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NmeaError {
    #[error("checksum mismatch: computed {computed:02X}, sentence carries {found:02X}")]
    ChecksumMismatch { computed: u8, found: u8 },
    #[error("malformed {field} field: {value:?}")]
    MalformedField { field: &'static str, value: String },
}

impl NmeaError {
    fn malformed(field: &'static str, value: impl Into<String>) -> Self {
        NmeaError::MalformedField {
            field,
            value: value.into(),
        }
    }
}

/// GGA fix quality indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixQuality {
    NoFix,
    GpsFix,
    DgpsFix,
}

impl FixQuality {
    pub fn is_valid(self) -> bool {
        !matches!(self, FixQuality::NoFix)
    }

    fn gga_digit(self) -> char {
        match self {
            FixQuality::NoFix => '0',
            FixQuality::GpsFix => '1',
            FixQuality::DgpsFix => '2',
        }
    }
}

/// One position report from the receiver.
///
/// When `quality` is [`FixQuality::NoFix`] the coordinates carry no meaning;
/// use [`GeoFix::position`], which returns `None` in that case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoFix {
    pub latitude: f64,
    pub longitude: f64,
    /// UTC time of day; receivers without a fix may leave it blank.
    pub time: Option<NaiveTime>,
    pub quality: FixQuality,
    pub satellites: u8,
    pub hdop: Option<f64>,
    pub altitude_m: Option<f64>,
}

impl GeoFix {
    pub fn new(latitude: f64, longitude: f64, time: NaiveTime) -> Self {
        GeoFix {
            latitude,
            longitude,
            time: Some(time),
            quality: FixQuality::GpsFix,
            satellites: 8,
            hdop: Some(0.9),
            altitude_m: None,
        }
    }

    pub fn no_fix(time: Option<NaiveTime>) -> Self {
        GeoFix {
            latitude: 0.0,
            longitude: 0.0,
            time,
            quality: FixQuality::NoFix,
            satellites: 0,
            hdop: None,
            altitude_m: None,
        }
    }

    /// Position if the fix is usable.
    pub fn position(&self) -> Option<GeoPoint> {
        self.quality
            .is_valid()
            .then(|| GeoPoint::new(self.latitude, self.longitude))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmcFix {
    pub fix: GeoFix,
    pub speed_knots: Option<f64>,
    pub course_deg: Option<f64>,
    pub date: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedSentence {
    Gga(GeoFix),
    Rmc(RmcFix),
    Unsupported { talker: String, kind: String },
}

impl ParsedSentence {
    /// The fix carried by a GGA or RMC sentence.
    pub fn fix(&self) -> Option<&GeoFix> {
        match self {
            ParsedSentence::Gga(fix) => Some(fix),
            ParsedSentence::Rmc(rmc) => Some(&rmc.fix),
            ParsedSentence::Unsupported { .. } => None,
        }
    }
}

pub fn checksum_byte(body: &[u8]) -> u8 {
    body.iter().fold(0u8, |acc, b| acc ^ b)
}

/// Two uppercase hex digits of the XOR of all body bytes.
pub fn compute_checksum(body: &str) -> String {
    format!("{:02X}", checksum_byte(body.as_bytes()))
}

/// Converts an NMEA `ddmm.mmmm` / `dddmm.mmmm` field to signed degrees.
pub fn ddmm_to_degrees(field: &str, hemisphere: char) -> Result<f64, NmeaError> {
    let (limit, negative, name) = match hemisphere {
        'N' => (90.0, false, "latitude"),
        'S' => (90.0, true, "latitude"),
        'E' => (180.0, false, "longitude"),
        'W' => (180.0, true, "longitude"),
        other => return Err(NmeaError::malformed("hemisphere", other.to_string())),
    };
    let bad = || NmeaError::malformed(name, field);

    let (int_part, frac_part) = match field.split_once('.') {
        Some((i, f)) => (i, f),
        None => (field, ""),
    };
    if int_part.len() < 3
        || !int_part.bytes().all(|b| b.is_ascii_digit())
        || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return Err(bad());
    }
    let split = int_part.len() - 2;
    let degrees: f64 = int_part[..split].parse().map_err(|_| bad())?;
    let minutes: f64 = format!("{}.{}0", &int_part[split..], frac_part)
        .parse()
        .map_err(|_| bad())?;
    if minutes >= 60.0 {
        return Err(bad());
    }
    let value = degrees + minutes / 60.0;
    if value > limit {
        return Err(bad());
    }
    Ok(if negative && value != 0.0 { -value } else { value })
}

/// Parses one sentence given as text. See [`parse_bytes`].
pub fn parse_sentence(line: &str) -> Result<ParsedSentence, NmeaError> {
    parse_bytes(line.as_bytes())
}

/// Parses one sentence from raw bytes.
///
/// The checksum is verified before anything else in the body is inspected, so
/// any corrupted body byte surfaces as [`NmeaError::ChecksumMismatch`].
pub fn parse_bytes(raw: &[u8]) -> Result<ParsedSentence, NmeaError> {
    let mut line = raw;
    while let [rest @ .., b'\r' | b'\n'] = line {
        line = rest;
    }
    let frame_err = || NmeaError::malformed("frame", String::from_utf8_lossy(raw).into_owned());
    if line.len() < 4 || line[0] != b'$' || line[line.len() - 3] != b'*' {
        return Err(frame_err());
    }
    let found = parse_hex_pair(&line[line.len() - 2..]).ok_or_else(|| {
        NmeaError::malformed(
            "checksum",
            String::from_utf8_lossy(&line[line.len() - 2..]).into_owned(),
        )
    })?;
    let body = &line[1..line.len() - 3];
    let computed = checksum_byte(body);
    if computed != found {
        return Err(NmeaError::ChecksumMismatch { computed, found });
    }
    if !body
        .iter()
        .all(|&b| (0x20..=0x7e).contains(&b) && b != b'$' && b != b'*')
    {
        return Err(frame_err());
    }
    // printable ASCII checked above
    let body = std::str::from_utf8(body).map_err(|_| frame_err())?;
    let fields: Vec<&str> = body.split(',').collect();
    let address = fields[0];
    if address.is_empty() || !address.bytes().all(|b| b.is_ascii_alphanumeric()) {
        return Err(NmeaError::malformed("address", address));
    }
    let (talker, kind) = if address.len() == 5 {
        address.split_at(2)
    } else {
        ("", address)
    };
    match kind {
        "GGA" if !talker.is_empty() => parse_gga(&fields).map(ParsedSentence::Gga),
        "RMC" if !talker.is_empty() => parse_rmc(&fields).map(ParsedSentence::Rmc),
        _ => Ok(ParsedSentence::Unsupported {
            talker: talker.to_string(),
            kind: kind.to_string(),
        }),
    }
}

/// Uppercase only, so a case-flipped checksum digit is still a corruption.
fn parse_hex_pair(pair: &[u8]) -> Option<u8> {
    let digit = |b: u8| match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    };
    Some(digit(pair[0])? * 16 + digit(pair[1])?)
}

fn field<'a>(fields: &[&'a str], index: usize) -> &'a str {
    fields.get(index).copied().unwrap_or("")
}

/// Plain decimal: optional sign, digits, at most one point. Rejects `inf`,
/// `NaN` and exponents that `f64::from_str` would accept.
fn parse_decimal(name: &'static str, text: &str) -> Result<f64, NmeaError> {
    let digits = text.strip_prefix('-').unwrap_or(text);
    let valid = !digits.is_empty()
        && digits.bytes().any(|b| b.is_ascii_digit())
        && digits.bytes().all(|b| b.is_ascii_digit() || b == b'.')
        && digits.bytes().filter(|&b| b == b'.').count() <= 1;
    if !valid {
        return Err(NmeaError::malformed(name, text));
    }
    text.parse().map_err(|_| NmeaError::malformed(name, text))
}

fn optional_decimal(name: &'static str, text: &str) -> Result<Option<f64>, NmeaError> {
    if text.is_empty() {
        Ok(None)
    } else {
        parse_decimal(name, text).map(Some)
    }
}

fn parse_time(text: &str) -> Result<Option<NaiveTime>, NmeaError> {
    if text.is_empty() {
        return Ok(None);
    }
    let bad = || NmeaError::malformed("time", text);
    let (hms, frac) = text.split_once('.').unwrap_or((text, ""));
    if hms.len() != 6
        || !hms.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
    {
        return Err(bad());
    }
    let hour: u32 = hms[0..2].parse().map_err(|_| bad())?;
    let minute: u32 = hms[2..4].parse().map_err(|_| bad())?;
    let second: u32 = hms[4..6].parse().map_err(|_| bad())?;
    let mut nanos = 0u32;
    for (i, digit) in frac.bytes().take(9).enumerate() {
        nanos += u32::from(digit - b'0') * 10u32.pow(8 - i as u32);
    }
    NaiveTime::from_hms_nano_opt(hour, minute, second, nanos)
        .filter(|_| second < 60)
        .map(Some)
        .ok_or_else(bad)
}

fn parse_date(text: &str) -> Result<Option<NaiveDate>, NmeaError> {
    if text.is_empty() {
        return Ok(None);
    }
    let bad = || NmeaError::malformed("date", text);
    if text.len() != 6 || !text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let day: u32 = text[0..2].parse().map_err(|_| bad())?;
    let month: u32 = text[2..4].parse().map_err(|_| bad())?;
    let year: i32 = text[4..6].parse().map_err(|_| bad())?;
    // two-digit years: 80..99 -> 1900s, otherwise 2000s
    let year = if year >= 80 { 1900 + year } else { 2000 + year };
    NaiveDate::from_ymd_opt(year, month, day)
        .map(Some)
        .ok_or_else(bad)
}

fn parse_hemisphere(name: &'static str, text: &str) -> Result<char, NmeaError> {
    let mut chars = text.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(NmeaError::malformed(name, text)),
    }
}

fn parse_position(
    fields: &[&str],
    lat_index: usize,
) -> Result<(f64, f64), NmeaError> {
    let lat_hemi = parse_hemisphere("hemisphere", field(fields, lat_index + 1))?;
    let lon_hemi = parse_hemisphere("hemisphere", field(fields, lat_index + 3))?;
    if !matches!(lat_hemi, 'N' | 'S') {
        return Err(NmeaError::malformed("hemisphere", lat_hemi.to_string()));
    }
    if !matches!(lon_hemi, 'E' | 'W') {
        return Err(NmeaError::malformed("hemisphere", lon_hemi.to_string()));
    }
    let lat = ddmm_to_degrees(field(fields, lat_index), lat_hemi)?;
    let lon = ddmm_to_degrees(field(fields, lat_index + 2), lon_hemi)?;
    Ok((lat, lon))
}

fn parse_gga(fields: &[&str]) -> Result<GeoFix, NmeaError> {
    let time = parse_time(field(fields, 1))?;
    let quality = match field(fields, 6) {
        "0" => FixQuality::NoFix,
        "2" => FixQuality::DgpsFix,
        // 1 = GPS; 3..=8 (PPS, RTK, estimated, manual, simulation) carry a position
        "1" | "3" | "4" | "5" | "6" | "7" | "8" => FixQuality::GpsFix,
        other => return Err(NmeaError::malformed("quality", other)),
    };
    let satellites = match field(fields, 7) {
        "" => 0,
        text => text
            .parse::<u8>()
            .ok()
            .filter(|_| text.bytes().all(|b| b.is_ascii_digit()))
            .ok_or_else(|| NmeaError::malformed("satellites", text))?,
    };
    let hdop = optional_decimal("hdop", field(fields, 8))?;
    if hdop.is_some_and(|h| h < 0.0) {
        return Err(NmeaError::malformed("hdop", field(fields, 8)));
    }
    let altitude_m = optional_decimal("altitude", field(fields, 9))?;

    let (latitude, longitude) = if quality.is_valid() {
        parse_position(fields, 2)?
    } else {
        (0.0, 0.0)
    };
    Ok(GeoFix {
        latitude,
        longitude,
        time,
        quality,
        satellites,
        hdop,
        altitude_m,
    })
}

fn parse_rmc(fields: &[&str]) -> Result<RmcFix, NmeaError> {
    let time = parse_time(field(fields, 1))?;
    let status = field(fields, 2);
    let quality = match (status, field(fields, 12)) {
        ("A", "D") => FixQuality::DgpsFix,
        ("A", _) => FixQuality::GpsFix,
        ("V", _) => FixQuality::NoFix,
        (other, _) => return Err(NmeaError::malformed("status", other)),
    };
    let (latitude, longitude) = if quality.is_valid() {
        parse_position(fields, 3)?
    } else {
        (0.0, 0.0)
    };
    let speed_knots = optional_decimal("speed", field(fields, 7))?;
    let course_deg = optional_decimal("course", field(fields, 8))?;
    let date = parse_date(field(fields, 9))?;
    Ok(RmcFix {
        fix: GeoFix {
            latitude,
            longitude,
            time,
            quality,
            satellites: 0,
            hdop: None,
            altitude_m: None,
        },
        speed_knots,
        course_deg,
        date,
    })
}

/// `(field, hemisphere)` with minutes quantized to 1e-4.
fn format_coordinate(value: f64, degree_width: usize, positive: char, negative: char) -> (String, char) {
    const TICKS_PER_DEGREE: u64 = 60 * 10_000;
    let ticks = (value.abs() * TICKS_PER_DEGREE as f64).round() as u64;
    let degrees = ticks / TICKS_PER_DEGREE;
    let rem = ticks % TICKS_PER_DEGREE;
    let text = format!(
        "{degrees:0degree_width$}{:02}.{:04}",
        rem / 10_000,
        rem % 10_000
    );
    let hemisphere = if value < 0.0 && ticks != 0 { negative } else { positive };
    (text, hemisphere)
}

fn format_time(time: NaiveTime) -> String {
    let centis = u64::from(time.num_seconds_from_midnight()) * 100
        + (f64::from(time.nanosecond().min(999_999_999)) / 1e7).round() as u64;
    let centis = centis % (86_400 * 100);
    let secs = centis / 100;
    format!(
        "{:02}{:02}{:02}.{:02}",
        secs / 3600,
        secs / 60 % 60,
        secs % 60,
        centis % 100
    )
}

/// Renders a fix as a `$GPGGA` sentence terminated by CR LF.
///
/// NoFix sentences leave the coordinate fields empty, as receivers do.
pub fn format_gga(fix: &GeoFix) -> String {
    let mut body = String::from("GPGGA,");
    if let Some(time) = fix.time {
        body.push_str(&format_time(time));
    }
    if fix.quality.is_valid() {
        let (lat, ns) = format_coordinate(fix.latitude, 2, 'N', 'S');
        let (lon, ew) = format_coordinate(fix.longitude, 3, 'E', 'W');
        let _ = write!(body, ",{lat},{ns},{lon},{ew}");
    } else {
        body.push_str(",,,,");
    }
    let _ = write!(body, ",{},{:02},", fix.quality.gga_digit(), fix.satellites);
    if let Some(hdop) = fix.hdop {
        let _ = write!(body, "{hdop:.1}");
    }
    let _ = write!(body, ",{:.1},M,0.0,M,,", fix.altitude_m.unwrap_or(0.0));
    format!("${body}*{}\r\n", compute_checksum(&body))
}

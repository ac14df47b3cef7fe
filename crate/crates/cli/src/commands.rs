//! The batch subcommands. Each takes its output streams as arguments and
//! returns an exit [`Status`].

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use zooguide::content::{inspect_pack, parse_control_points, CalibrationBlock, ContentPack, PackError};
use zooguide::engine::{Session, SessionConfig};
use zooguide::geo::{fit_affine, ControlPoint, GeoError, MapCalibration};
use zooguide::simulator::{build_walk, parse_walk_script, replay, Pacing, ReplaySummary, SimError, WalkScript};

use crate::Status;

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

/// Loads a pack, or returns every finding plus the exit status they map to.
pub fn load(dir: &Path) -> Result<ContentPack, (Vec<PackError>, Status)> {
    let report = inspect_pack(dir);
    match report.pack {
        Some(pack) => Ok(pack),
        None => {
            let status = if report.findings.iter().any(PackError::is_io) {
                Status::Io
            } else {
                Status::Invalid
            };
            Err((report.findings, status))
        }
    }
}

pub fn validate(dir: &Path, out: &mut dyn Write) -> Status {
    let report = inspect_pack(dir);
    for finding in &report.findings {
        let _ = writeln!(out, "{finding}");
    }
    let _ = writeln!(out, "{}", plural(report.findings.len(), "error"));
    if report.findings.iter().any(PackError::is_io) {
        Status::Io
    } else if report.findings.is_empty() {
        Status::Ok
    } else {
        Status::Invalid
    }
}

#[derive(Debug)]
pub enum CalibrateError {
    Io(String),
    Row { line: usize, message: String },
    Fit(GeoError),
}

impl std::fmt::Display for CalibrateError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CalibrateError::Io(message) => f.write_str(message),
            CalibrateError::Row { line, message } => write!(f, "line {line}: {message}"),
            CalibrateError::Fit(err) => write!(f, "{err}"),
        }
    }
}

pub fn fit_points_file(file: &Path) -> Result<MapCalibration, CalibrateError> {
    let text = fs::read_to_string(file).map_err(|e| CalibrateError::Io(format!("cannot read {}: {e}", file.display())))?;
    let points = parse_control_points(&text)
        .into_iter()
        .map(|(line, row)| row.map_err(|message| CalibrateError::Row { line, message }))
        .collect::<Result<Vec<ControlPoint>, _>>()?;
    fit_affine(&points).map_err(CalibrateError::Fit)
}

/// The JSON object to paste into a manifest as its `calibration` field.
pub fn calibration_block_json(cal: &MapCalibration) -> String {
    let block = serde_json::json!({ "calibration": CalibrationBlock::from(cal) });
    serde_json::to_string_pretty(&block).expect("calibration block serializes")
}

pub fn calibrate(file: &Path, block_out: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> Status {
    let cal = match fit_points_file(file) {
        Ok(cal) => cal,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return match e {
                CalibrateError::Io(_) => Status::Io,
                _ => Status::Invalid,
            };
        }
    };
    let k = cal.coefficients;
    let _ = writeln!(out, "x_px = {} * lon + {} * lat + {}", k.a, k.b, k.c);
    let _ = writeln!(out, "y_px = {} * lon + {} * lat + {}", k.d, k.e, k.f);
    let _ = writeln!(out, "rms_residual = {} px over {}", cal.rms_residual, plural(cal.control_points.len(), "point"));
    let block = calibration_block_json(&cal);
    let _ = writeln!(out, "{block}");
    if let Some(path) = block_out {
        if let Err(e) = fs::write(path, block + "\n") {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            return Status::Io;
        }
    }
    Status::Ok
}

pub fn read_walk(file: &Path, seed: Option<u64>) -> Result<WalkScript, (String, Status)> {
    let text = fs::read_to_string(file).map_err(|e| (format!("cannot read {}: {e}", file.display()), Status::Io))?;
    let mut script = parse_walk_script(&text).map_err(|e: SimError| (format!("{}: {e}", file.display()), Status::Invalid))?;
    if let Some(seed) = seed {
        script.seed = seed;
    }
    Ok(script)
}

/// Replays a walk as fast as possible through a fresh session and returns the
/// exported event log.
pub fn tour_log(pack: Arc<ContentPack>, script: &WalkScript) -> Result<(String, ReplaySummary), String> {
    let stream = build_walk(script).map_err(|e| e.to_string())?;
    let mut session = Session::new(pack, SessionConfig::default()).map_err(|e| e.to_string())?;
    let summary = replay(&stream, &mut session, Pacing::AsFastAsPossible);
    Ok((session.export_log(), summary))
}

pub fn tour(
    dir: &Path,
    walk: &Path,
    log_path: &Path,
    seed: Option<u64>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Status {
    let pack = match load(dir) {
        Ok(pack) => Arc::new(pack),
        Err((findings, status)) => {
            for finding in findings {
                let _ = writeln!(err, "{finding}");
            }
            return status;
        }
    };
    let script = match read_walk(walk, seed) {
        Ok(script) => script,
        Err((message, status)) => {
            let _ = writeln!(err, "error: {message}");
            return status;
        }
    };
    let (log, summary) = match tour_log(pack, &script) {
        Ok(result) => result,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            return Status::Invalid;
        }
    };
    if let Err(e) = fs::write(log_path, &log) {
        let _ = writeln!(err, "error: cannot write {}: {e}", log_path.display());
        return Status::Io;
    }
    let _ = writeln!(
        out,
        "{}: {}; {} delivered, {} dropped, {} garbage",
        log_path.display(),
        plural(log.lines().count(), "event"),
        summary.delivered,
        summary.dropped,
        summary.garbage
    );
    Status::Ok
}

//! Shared helpers for the CLI test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn pack_dir() -> PathBuf {
    fixtures().join("big-cats")
}

pub fn walk_file() -> PathBuf {
    fixtures().join("walks/big-cats-tour.walk")
}

pub fn golden_log() -> PathBuf {
    fixtures().join("golden/big-cats-tour.log")
}

pub fn zooguide(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zooguide"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .expect("binary runs")
}

pub fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Copies the fixture pack into a fresh temporary directory.
pub fn scratch_pack() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&pack_dir(), dir.path());
    dir
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

pub fn replace_in(path: &Path, from: &str, to: &str) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.contains(from), "{from:?} not in {}", path.display());
    std::fs::write(path, text.replacen(from, to, 1)).unwrap();
}

/// Seeds the three defects used by the validation checks: a dangling
/// hotspot reference, an event ending before it starts and a missing media file.
pub fn seed_three_defects(root: &Path) {
    replace_in(&root.join("hotspots.jsonl"), "\"content_id\": \"jaguar\"", "\"content_id\": \"ghost\"");
    replace_in(&root.join("events.jsonl"), "\"start\": \"11:00\"", "\"start\": \"12:00\"");
    std::fs::remove_file(root.join("media/lion.txt")).unwrap();
}

/// Parsed lines of an exported event log, without going through the library.
pub fn log_lines(text: &str) -> Vec<serde_json::Value> {
    text.lines().map(|l| serde_json::from_str(l).expect("log line is JSON")).collect()
}

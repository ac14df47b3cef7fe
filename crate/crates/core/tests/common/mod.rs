//! Fixture access for integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveTime;
use zooguide::content::load_pack;
use zooguide::nmea::GeoFix;
use zooguide::{ContentPack, GeoPoint};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn pack_dir() -> PathBuf {
    fixtures().join("big-cats")
}

pub fn pack() -> Arc<ContentPack> {
    Arc::new(load_pack(pack_dir()).expect("fixture pack loads"))
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

pub const TIGER: GeoPoint = GeoPoint::new(-37.7850, 144.9505);
pub const MIDDLE: GeoPoint = GeoPoint::new(-37.7841, 144.9515);

pub fn fix_at(p: GeoPoint) -> GeoFix {
    GeoFix::new(p.lat, p.lon, NaiveTime::from_hms_opt(10, 0, 0).unwrap())
}

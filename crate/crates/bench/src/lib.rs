//! Inputs shared by the benchmarks.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use zooguide::content::load_pack;
use zooguide::geo::{AffineCoefficients, ControlPoint};
use zooguide::simulator::{build_walk, parse_walk_script};
use zooguide::{ContentPack, GeoPoint, PixelPoint, WalkScript};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_pack() -> Arc<ContentPack> {
    Arc::new(load_pack(fixtures().join("big-cats")).expect("fixture pack loads"))
}

pub fn fixture_walk() -> WalkScript {
    let text = std::fs::read_to_string(fixtures().join("walks/big-cats-tour.walk")).expect("walk fixture");
    parse_walk_script(&text).expect("walk fixture parses")
}

/// The sentences a receiver emits over the fixture walk.
pub fn fixture_sentences() -> Vec<Vec<u8>> {
    build_walk(&fixture_walk())
        .expect("walk builds")
        .items
        .into_iter()
        .map(|item| item.payload)
        .collect()
}

/// `n` control points on a grid over the zoo, mapped exactly through a
/// map-like affine.
pub fn grid_points(n: usize) -> Vec<ControlPoint> {
    let k = AffineCoefficients {
        a: 250_000.0,
        b: 1_500.0,
        c: -36_180_000.0,
        d: -1_200.0,
        e: -250_000.0,
        f: -9_277_300.0,
    };
    let side = (n as f64).sqrt().ceil() as usize;
    (0..n)
        .map(|i| {
            let geo = GeoPoint::new(
                -37.787 + 0.006 * (i / side) as f64 / side as f64,
                144.948 + 0.008 * (i % side) as f64 / side as f64,
            );
            let pixel = PixelPoint::new(k.a * geo.lon + k.b * geo.lat + k.c, k.d * geo.lon + k.e * geo.lat + k.f);
            ControlPoint { geo, pixel }
        })
        .collect()
}

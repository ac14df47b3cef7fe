//! Reference implementations and seeded generators shared by the property
//! tests and the acceptance run. Nothing here calls into the code under test
//! except for plain data types.
#![allow(dead_code)]

use chrono::NaiveTime;
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use zooguide::geo::{AffineCoefficients, ControlPoint};
use zooguide::nmea::{FixQuality, GeoFix};
use zooguide::{GeoPoint, PixelPoint};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

pub fn xor_checksum(body: &[u8]) -> u8 {
    let mut c = 0u8;
    for b in body {
        c ^= *b;
    }
    c
}

fn unit_vector(p: GeoPoint) -> [f64; 3] {
    let (lat, lon) = (p.lat.to_radians(), p.lon.to_radians());
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

/// Great-circle distance from the chord between the two unit vectors.
pub fn chord_distance_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (u, w) = (unit_vector(a), unit_vector(b));
    let chord = ((u[0] - w[0]).powi(2) + (u[1] - w[1]).powi(2) + (u[2] - w[2]).powi(2)).sqrt();
    2.0 * EARTH_RADIUS_M * (chord / 2.0).min(1.0).asin()
}

/// Metres per degree of latitude on the reference sphere.
pub fn meters_per_degree() -> f64 {
    EARTH_RADIUS_M * std::f64::consts::PI / 180.0
}

/// Moves `p` by a small east/north offset in metres.
pub fn offset(p: GeoPoint, east_m: f64, north_m: f64) -> GeoPoint {
    let m = meters_per_degree();
    GeoPoint::new(p.lat + north_m / m, p.lon + east_m / (m * p.lat.to_radians().cos()))
}

/// Winding number of `q` around the closed ring `poly` (Sunday's crossing rule).
pub fn winding_number(poly: &[(f64, f64)], q: (f64, f64)) -> i32 {
    let is_left = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| (b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1);
    let mut wn = 0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        if a.1 <= q.1 {
            if b.1 > q.1 && is_left(a, b, q) > 0.0 {
                wn += 1;
            }
        } else if b.1 <= q.1 && is_left(a, b, q) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Containment by winding number with vertices taken as plain (lon, lat)
/// pairs. Any equirectangular plane differs from this one by an affine map,
/// which preserves containment.
pub fn polygon_contains(vertices: &[GeoPoint], p: GeoPoint) -> bool {
    let ring: Vec<(f64, f64)> = vertices.iter().map(|v| (v.lon, v.lat)).collect();
    winding_number(&ring, (p.lon, p.lat)) != 0
}

/// Least-squares affine fit through the 3x3 normal equations, solved by LU.
/// Columns are centred before forming the normal matrix so the system stays
/// well conditioned at real-world longitudes.
pub fn normal_equations_fit(points: &[ControlPoint]) -> Option<[f64; 6]> {
    let n = points.len() as f64;
    let lon0 = points.iter().map(|p| p.geo.lon).sum::<f64>() / n;
    let lat0 = points.iter().map(|p| p.geo.lat).sum::<f64>() / n;
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs_x = Vector3::<f64>::zeros();
    let mut rhs_y = Vector3::<f64>::zeros();
    for p in points {
        let row = Vector3::new(p.geo.lon - lon0, p.geo.lat - lat0, 1.0);
        normal += row * row.transpose();
        rhs_x += row * p.pixel.x;
        rhs_y += row * p.pixel.y;
    }
    let lu = normal.lu();
    let sx = lu.solve(&rhs_x)?;
    let sy = lu.solve(&rhs_y)?;
    Some([
        sx[0],
        sx[1],
        sx[2] - sx[0] * lon0 - sx[1] * lat0,
        sy[0],
        sy[1],
        sy[2] - sy[0] * lon0 - sy[1] * lat0,
    ])
}

pub fn relative_error(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

pub fn max_relative_error(got: &[f64; 6], want: &[f64; 6]) -> f64 {
    got.iter().zip(want).map(|(g, w)| relative_error(*g, *w)).fold(0.0, f64::max)
}

/// A map-like affine: roughly 1e4..1e6 px per degree with a small rotation,
/// offset so that `anchor` lands somewhere in a 5000 px square.
pub fn random_affine(rng: &mut impl Rng, anchor: GeoPoint) -> AffineCoefficients {
    let scale = 10f64.powf(rng.random_range(4.0..6.0));
    let theta: f64 = rng.random_range(-0.3..0.3);
    let aspect: f64 = rng.random_range(0.6..1.4);
    let (a, b) = (scale * theta.cos(), -scale * aspect * theta.sin());
    let (d, e) = (scale * theta.sin(), -scale * aspect * theta.cos());
    AffineCoefficients {
        a,
        b,
        c: rng.random_range(0.0..5000.0) - a * anchor.lon - b * anchor.lat,
        d,
        e,
        f: rng.random_range(0.0..5000.0) - d * anchor.lon - e * anchor.lat,
    }
}

/// A random affine plus `n` control points mapped exactly through it, in a
/// box somewhere on the globe. The first three points span a right triangle
/// so every instance is well posed.
pub fn exact_instance(rng: &mut impl Rng, n: usize) -> (AffineCoefficients, Vec<ControlPoint>) {
    let origin = GeoPoint::new(rng.random_range(-70.0..70.0), rng.random_range(-170.0..170.0));
    let span = 10f64.powf(rng.random_range(-3.0..0.0));
    let affine = random_affine(rng, origin);
    let corners = [(0.0, 0.0), (span, 0.0), (0.0, span)];
    let points = (0..n)
        .map(|i| {
            let (dlat, dlon) = corners
                .get(i)
                .copied()
                .unwrap_or_else(|| (rng.random_range(0.0..span), rng.random_range(0.0..span)));
            let geo = GeoPoint::new(origin.lat + dlat, origin.lon + dlon);
            let pixel = PixelPoint::new(
                affine.a * geo.lon + affine.b * geo.lat + affine.c,
                affine.d * geo.lon + affine.e * geo.lat + affine.f,
            );
            ControlPoint { geo, pixel }
        })
        .collect();
    (affine, points)
}

/// A random fix with the precision a GGA sentence can carry.
pub fn random_fix(rng: &mut impl Rng) -> GeoFix {
    let centis = rng.random_range(0..86_400 * 100u32);
    let time = NaiveTime::from_num_seconds_from_midnight_opt(centis / 100, (centis % 100) * 10_000_000).unwrap();
    GeoFix {
        latitude: rng.random_range(-89.999..89.999),
        longitude: rng.random_range(-179.999..179.999),
        time: Some(time),
        quality: if rng.random_bool(0.5) {
            FixQuality::GpsFix
        } else {
            FixQuality::DgpsFix
        },
        satellites: rng.random_range(3..=12),
        hdop: Some(f64::from(rng.random_range(5..100u8)) / 10.0),
        altitude_m: Some(f64::from(rng.random_range(-500..9000i32)) / 10.0),
    }
}

/// Star-shaped (hence simple) polygon around `center`, radii in metres.
pub fn star_polygon(rng: &mut impl Rng, center: GeoPoint, n: usize, r_min: f64, r_max: f64) -> Vec<GeoPoint> {
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    angles
        .into_iter()
        .map(|t| {
            let r = rng.random_range(r_min..r_max);
            offset(center, r * t.cos(), r * t.sin())
        })
        .collect()
}

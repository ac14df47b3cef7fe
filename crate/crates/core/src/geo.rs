//! Geodetic distance and degrees-to-pixels georeferencing.
//!
//! All metric work uses a spherical earth of radius [`EARTH_RADIUS_M`]. The map
//! calibration is a single six-coefficient affine transform, which is accurate
//! to well under GPS noise across a site a few hundred metres wide.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Metres per degree of latitude (and of longitude at the equator).
pub const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("insufficient control points: need at least 3, got {0}")]
    InsufficientPoints(usize),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub const fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Map raster coordinates: x rightward, y downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        PixelPoint { x, y }
    }
}

/// Great-circle distance in metres.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Equirectangular east/north plane in metres around an origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    origin: GeoPoint,
    east_scale: f64,
}

impl LocalFrame {
    pub fn new(origin: GeoPoint) -> Self {
        LocalFrame {
            origin,
            east_scale: METERS_PER_DEGREE * origin.lat.to_radians().cos(),
        }
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    /// `(east_m, north_m)` of `p` relative to the origin.
    pub fn to_local(&self, p: GeoPoint) -> (f64, f64) {
        (
            (p.lon - self.origin.lon) * self.east_scale,
            (p.lat - self.origin.lat) * METERS_PER_DEGREE,
        )
    }

    pub fn to_geo(&self, east_m: f64, north_m: f64) -> GeoPoint {
        GeoPoint::new(
            self.origin.lat + north_m / METERS_PER_DEGREE,
            self.origin.lon + east_m / self.east_scale,
        )
    }
}

/// One georeferencing control point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub geo: GeoPoint,
    pub pixel: PixelPoint,
}

/// Affine map `x = a*lon + b*lat + c`, `y = d*lon + e*lat + f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl AffineCoefficients {
    pub const IDENTITY: AffineCoefficients = AffineCoefficients {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        e: 1.0,
        f: 0.0,
    };

    pub fn as_array(&self) -> [f64; 6] {
        [self.a, self.b, self.c, self.d, self.e, self.f]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        AffineCoefficients {
            a: v[0],
            b: v[1],
            c: v[2],
            d: v[3],
            e: v[4],
            f: v[5],
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }

    pub fn apply(&self, p: GeoPoint) -> PixelPoint {
        PixelPoint::new(
            self.a * p.lon + self.b * p.lat + self.c,
            self.d * p.lon + self.e * p.lat + self.f,
        )
    }

    /// Root-mean-square pixel error over the control points.
    pub fn rms_residual(&self, points: &[ControlPoint]) -> f64 {
        if points.is_empty() {
            return 0.0;
        }
        let sum: f64 = points
            .iter()
            .map(|cp| {
                let q = self.apply(cp.geo);
                (q.x - cp.pixel.x).powi(2) + (q.y - cp.pixel.y).powi(2)
            })
            .sum();
        (sum / points.len() as f64).sqrt()
    }
}

/// A fitted calibration together with the data it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapCalibration {
    pub coefficients: AffineCoefficients,
    pub rms_residual: f64,
    pub control_points: Vec<ControlPoint>,
}

impl MapCalibration {
    /// Wraps known coefficients; the residual is computed over `control_points`.
    pub fn from_coefficients(coefficients: AffineCoefficients, control_points: Vec<ControlPoint>) -> Self {
        MapCalibration {
            rms_residual: coefficients.rms_residual(&control_points),
            coefficients,
            control_points,
        }
    }

    pub fn identity() -> Self {
        Self::from_coefficients(AffineCoefficients::IDENTITY, Vec::new())
    }

    pub fn geo_to_pixel(&self, p: GeoPoint) -> PixelPoint {
        geo_to_pixel(self, p)
    }

    pub fn pixel_to_geo(&self, q: PixelPoint) -> Result<GeoPoint, GeoError> {
        pixel_to_geo(self, q)
    }
}

/// Least-squares affine fit from at least three non-collinear control points.
///
/// Works on coordinates centred at the control-point means, which reduces the
/// problem to a 2x2 system per output axis and keeps it well conditioned even
/// when the site spans only a few thousandths of a degree.
pub fn fit_affine(pairs: &[ControlPoint]) -> Result<MapCalibration, GeoError> {
    if pairs.len() < 3 {
        return Err(GeoError::InsufficientPoints(pairs.len()));
    }
    let n = pairs.len() as f64;
    let mean = |f: fn(&ControlPoint) -> f64| pairs.iter().map(f).sum::<f64>() / n;
    let lon0 = mean(|cp| cp.geo.lon);
    let lat0 = mean(|cp| cp.geo.lat);
    let x0 = mean(|cp| cp.pixel.x);
    let y0 = mean(|cp| cp.pixel.y);

    let (mut s_uu, mut s_uv, mut s_vv) = (0.0, 0.0, 0.0);
    let (mut s_ux, mut s_vx, mut s_uy, mut s_vy) = (0.0, 0.0, 0.0, 0.0);
    for cp in pairs {
        let u = cp.geo.lon - lon0;
        let v = cp.geo.lat - lat0;
        let dx = cp.pixel.x - x0;
        let dy = cp.pixel.y - y0;
        s_uu += u * u;
        s_uv += u * v;
        s_vv += v * v;
        s_ux += u * dx;
        s_vx += v * dx;
        s_uy += u * dy;
        s_vy += v * dy;
    }
    let det = s_uu * s_vv - s_uv * s_uv;
    if !det.is_finite() || det <= 1e-12 * s_uu * s_vv {
        return Err(GeoError::DegenerateGeometry("control points are collinear"));
    }
    let a = (s_ux * s_vv - s_vx * s_uv) / det;
    let b = (s_vx * s_uu - s_ux * s_uv) / det;
    let d = (s_uy * s_vv - s_vy * s_uv) / det;
    let e = (s_vy * s_uu - s_uy * s_uv) / det;
    let coefficients = AffineCoefficients {
        a,
        b,
        c: x0 - a * lon0 - b * lat0,
        d,
        e,
        f: y0 - d * lon0 - e * lat0,
    };
    Ok(MapCalibration::from_coefficients(coefficients, pairs.to_vec()))
}

pub fn geo_to_pixel(cal: &MapCalibration, p: GeoPoint) -> PixelPoint {
    cal.coefficients.apply(p)
}

pub fn pixel_to_geo(cal: &MapCalibration, q: PixelPoint) -> Result<GeoPoint, GeoError> {
    let k = &cal.coefficients;
    let det = k.determinant();
    if det.is_nan() || det.abs() < 1e-12 {
        return Err(GeoError::DegenerateGeometry("calibration matrix is singular"));
    }
    let dx = q.x - k.c;
    let dy = q.y - k.f;
    Ok(GeoPoint::new(
        (k.a * dy - k.d * dx) / det,
        (k.e * dx - k.b * dy) / det,
    ))
}

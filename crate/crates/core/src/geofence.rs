//! Hotspot geofences with an exit hysteresis band.
//!
//! A visitor enters a hotspot when their position is inside its geometry, and
//! only leaves once they are farther than `exit_buffer` metres outside it.
//! Polygon tests run in a local east/north plane centred on the polygon
//! centroid.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geo::{haversine_m, GeoPoint, LocalFrame};

/// Points closer than this to a polygon edge count as on the boundary.
const BOUNDARY_EPSILON_M: f64 = 1e-9;

/// Default hotspot radius when authoring circles.
pub const DEFAULT_RADIUS_M: f64 = 25.0;
pub const DEFAULT_EXIT_BUFFER_M: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Geometry {
    Circle { center: GeoPoint, radius_m: f64 },
    /// Implicitly closed; the last vertex must not repeat the first.
    Polygon { vertices: Vec<GeoPoint> },
}

impl Geometry {
    /// Checks the geometric invariants, returning a human-readable reason.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Geometry::Circle { center, radius_m } => {
                if !center.is_valid() {
                    return Err("circle center out of range".into());
                }
                if !(radius_m.is_finite() && *radius_m > 0.0) {
                    return Err(format!("radius must be > 0, got {radius_m}"));
                }
                Ok(())
            }
            Geometry::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(format!("polygon needs at least 3 vertices, got {}", vertices.len()));
                }
                if vertices.iter().any(|v| !v.is_valid()) {
                    return Err("polygon vertex out of range".into());
                }
                let plane = PlanarPolygon::new(vertices);
                if !plane.is_simple() {
                    return Err("polygon edges intersect".into());
                }
                if plane.signed_area().abs() <= 1e-6 {
                    return Err("polygon has zero area".into());
                }
                Ok(())
            }
        }
    }

    /// Circle center or polygon area centroid.
    pub fn anchor(&self) -> GeoPoint {
        match self {
            Geometry::Circle { center, .. } => *center,
            Geometry::Polygon { vertices } => PlanarPolygon::new(vertices).centroid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub id: String,
    pub name: String,
    pub geometry: Geometry,
    pub content_id: String,
    #[serde(default)]
    pub category: String,
}

impl Hotspot {
    pub fn circle(id: &str, center: GeoPoint, radius_m: f64, content_id: &str) -> Self {
        Hotspot {
            id: id.to_string(),
            name: id.to_string(),
            geometry: Geometry::Circle { center, radius_m },
            content_id: content_id.to_string(),
            category: String::new(),
        }
    }

    pub fn polygon(id: &str, vertices: Vec<GeoPoint>, content_id: &str) -> Self {
        Hotspot {
            id: id.to_string(),
            name: id.to_string(),
            geometry: Geometry::Polygon { vertices },
            content_id: content_id.to_string(),
            category: String::new(),
        }
    }

    pub fn anchor(&self) -> GeoPoint {
        self.geometry.anchor()
    }
}

/// Polygon projected into a local metric plane.
struct PlanarPolygon {
    frame: LocalFrame,
    points: Vec<(f64, f64)>,
}

impl PlanarPolygon {
    fn new(vertices: &[GeoPoint]) -> Self {
        let n = vertices.len().max(1) as f64;
        let mean = GeoPoint::new(
            vertices.iter().map(|v| v.lat).sum::<f64>() / n,
            vertices.iter().map(|v| v.lon).sum::<f64>() / n,
        );
        let provisional = Self::in_frame(LocalFrame::new(mean), vertices);
        let origin = provisional.centroid();
        Self::in_frame(LocalFrame::new(origin), vertices)
    }

    fn in_frame(frame: LocalFrame, vertices: &[GeoPoint]) -> Self {
        PlanarPolygon {
            points: vertices.iter().map(|&v| frame.to_local(v)).collect(),
            frame,
        }
    }

    fn edges(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    fn signed_area(&self) -> f64 {
        self.edges().map(|(p, q)| p.0 * q.1 - q.0 * p.1).sum::<f64>() / 2.0
    }

    fn centroid(&self) -> GeoPoint {
        let area = self.signed_area();
        if area.abs() <= f64::EPSILON {
            return self.frame.origin();
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let cross = p.0 * q.1 - q.0 * p.1;
            cx += (p.0 + q.0) * cross;
            cy += (p.1 + q.1) * cross;
        }
        self.frame.to_geo(cx / (6.0 * area), cy / (6.0 * area))
    }

    fn distance_to_boundary(&self, q: (f64, f64)) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(q, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Even-odd ray cast towards +x; boundary points count as inside.
    fn contains(&self, q: (f64, f64)) -> bool {
        if self.distance_to_boundary(q) <= BOUNDARY_EPSILON_M {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.1 > q.1) != (b.1 > q.1) {
                let x_cross = a.0 + (q.1 - a.1) / (b.1 - a.1) * (b.0 - a.0);
                if q.0 < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn is_simple(&self) -> bool {
        let n = self.points.len();
        let edges: Vec<_> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(edges[i].0, edges[i].1, edges[j].0, edges[j].1) {
                    return false;
                }
            }
        }
        true
    }
}

fn segment_distance(q: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((q.0 - a.0) * dx + (q.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (px, py) = (a.0 + t * dx, a.1 + t * dy);
    ((q.0 - px).powi(2) + (q.1 - py).powi(2)).sqrt()
}

fn orientation(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn segments_intersect(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on_segment = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        c.0 >= a.0.min(b.0) && c.0 <= a.0.max(b.0) && c.1 >= a.1.min(b.1) && c.1 <= a.1.max(b.1)
    };
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Whether `p` lies inside (or on the boundary of) the hotspot.
pub fn contains(hotspot: &Hotspot, p: GeoPoint) -> bool {
    contains_inflated(&hotspot.geometry, p, 0.0)
}

/// Containment in the geometry grown outward by `buffer_m` metres.
pub fn contains_inflated(geometry: &Geometry, p: GeoPoint, buffer_m: f64) -> bool {
    match geometry {
        Geometry::Circle { center, radius_m } => haversine_m(*center, p) <= radius_m + buffer_m,
        Geometry::Polygon { vertices } => {
            let plane = PlanarPolygon::new(vertices);
            let q = plane.frame.to_local(p);
            plane.contains(q) || (buffer_m > 0.0 && plane.distance_to_boundary(q) <= buffer_m)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FenceState {
    pub inside: BTreeSet<String>,
}

impl FenceState {
    pub fn is_inside(&self, id: &str) -> bool {
        self.inside.contains(id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum FenceEvent {
    Entered(String),
    Exited(String),
}

/// Applies one position sample.
///
/// Returns the new state and the transitions it caused, ordered by hotspot id.
/// Ids in `state` that no longer name a hotspot are dropped silently.
pub fn update(
    state: &FenceState,
    hotspots: &[Hotspot],
    p: GeoPoint,
    exit_buffer_m: f64,
) -> (FenceState, Vec<FenceEvent>) {
    let mut ordered: Vec<&Hotspot> = hotspots.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));

    let mut next = FenceState::default();
    let mut events = Vec::new();
    for hotspot in ordered {
        let was_inside = state.is_inside(&hotspot.id);
        let now_inside = if was_inside {
            contains_inflated(&hotspot.geometry, p, exit_buffer_m)
        } else {
            contains(hotspot, p)
        };
        match (was_inside, now_inside) {
            (false, true) => events.push(FenceEvent::Entered(hotspot.id.clone())),
            (true, false) => events.push(FenceEvent::Exited(hotspot.id.clone())),
            _ => {}
        }
        if now_inside {
            next.inside.insert(hotspot.id.clone());
        }
    }
    (next, events)
}

/// The `k` hotspots whose anchors are closest to `p`, nearest first, ties by id.
pub fn nearest_hotspots(hotspots: &[Hotspot], p: GeoPoint, k: usize) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = hotspots
        .iter()
        .map(|h| (h.id.clone(), haversine_m(h.anchor(), p)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

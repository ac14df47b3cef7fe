//! The layered map view: background raster, hotspot markers and a cursor that
//! always sits at the screen centre.
//!
//! The cursor takes no part in the math here. Keeping the visitor under it is
//! simply a matter of centring the viewport on the visitor's map pixel.

use serde::{Deserialize, Serialize};

use crate::geo::{GeoPoint, MapCalibration, PixelPoint, METERS_PER_DEGREE};
use crate::geofence::Hotspot;

/// Allowed zoom factors, smallest first.
pub const ZOOM_LADDER: [f64; 5] = [0.5, 0.75, 1.0, 1.5, 2.0];
const UNIT_ZOOM_INDEX: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub width: f64,
    pub height: f64,
}

impl Extent {
    pub const fn new(width: f64, height: f64) -> Self {
        Extent { width, height }
    }

    pub fn is_valid(&self) -> bool {
        self.width.is_finite() && self.height.is_finite() && self.width > 0.0 && self.height > 0.0
    }
}

/// Screen coordinates in device pixels, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenPoint {
    pub x: f64,
    pub y: f64,
}

impl ScreenPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        ScreenPoint { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    /// Map point under the screen centre.
    pub center: PixelPoint,
    zoom_index: usize,
    pub screen: Extent,
    pub map_extent: Extent,
}

impl Viewport {
    /// Centred on the middle of the map at zoom 1.0.
    pub fn new(screen: Extent, map_extent: Extent) -> Self {
        Viewport {
            center: PixelPoint::new(map_extent.width / 2.0, map_extent.height / 2.0),
            zoom_index: UNIT_ZOOM_INDEX,
            screen,
            map_extent,
        }
    }

    pub fn zoom(&self) -> f64 {
        ZOOM_LADDER[self.zoom_index]
    }

    pub fn screen_center(&self) -> ScreenPoint {
        ScreenPoint {
            x: self.screen.width / 2.0,
            y: self.screen.height / 2.0,
        }
    }

    pub fn center_on(&self, fix_px: PixelPoint) -> Viewport {
        Viewport {
            center: fix_px,
            ..*self
        }
    }

    /// One rung up (`direction > 0`) or down (`direction < 0`) the ladder,
    /// clamped at both ends. The centre is untouched.
    pub fn zoom_step(&self, direction: i32) -> Viewport {
        let zoom_index = match direction.signum() {
            1 => (self.zoom_index + 1).min(ZOOM_LADDER.len() - 1),
            -1 => self.zoom_index.saturating_sub(1),
            _ => self.zoom_index,
        };
        Viewport { zoom_index, ..*self }
    }

    pub fn map_to_screen(&self, p: PixelPoint) -> ScreenPoint {
        let zoom = self.zoom();
        ScreenPoint {
            x: (p.x - self.center.x) * zoom + self.screen.width / 2.0,
            y: (p.y - self.center.y) * zoom + self.screen.height / 2.0,
        }
    }

    pub fn screen_to_map(&self, s: ScreenPoint) -> PixelPoint {
        let zoom = self.zoom();
        PixelPoint::new(
            (s.x - self.screen.width / 2.0) / zoom + self.center.x,
            (s.y - self.screen.height / 2.0) / zoom + self.center.y,
        )
    }

    fn on_screen(&self, s: ScreenPoint) -> bool {
        (0.0..=self.screen.width).contains(&s.x) && (0.0..=self.screen.height).contains(&s.y)
    }

    /// Hotspots whose anchor falls on screen (edges inclusive), ordered by id.
    pub fn visible_hotspots(&self, hotspots: &[Hotspot], cal: &MapCalibration) -> Vec<(String, ScreenPoint)> {
        let mut visible: Vec<(String, ScreenPoint)> = hotspots
            .iter()
            .map(|h| (h.id.clone(), self.map_to_screen(cal.geo_to_pixel(h.anchor()))))
            .filter(|(_, s)| self.on_screen(*s))
            .collect();
        visible.sort_by(|a, b| a.0.cmp(&b.0));
        visible
    }
}

/// Geographic rectangle of the zoo, optionally grown by a margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZooBounds {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
    #[serde(default)]
    pub margin_m: f64,
}

impl ZooBounds {
    pub fn validate(&self) -> Result<(), String> {
        let finite = [self.min_lat, self.max_lat, self.min_lon, self.max_lon, self.margin_m]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err("bounds must be finite".into());
        }
        if !(self.min_lat < self.max_lat && self.min_lon < self.max_lon) {
            return Err("bounds need min < max on both axes".into());
        }
        if self.margin_m < 0.0 {
            return Err("margin must be >= 0".into());
        }
        Ok(())
    }

    /// Containment without the margin.
    pub fn contains_strict(&self, p: GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat) && (self.min_lon..=self.max_lon).contains(&p.lon)
    }
}

/// Rectangle test with `margin_m` converted to degrees at the mid-latitude.
pub fn in_zoo_range(p: GeoPoint, bounds: &ZooBounds) -> bool {
    let mid_lat = (bounds.min_lat + bounds.max_lat) / 2.0;
    let dlat = bounds.margin_m / METERS_PER_DEGREE;
    let dlon = bounds.margin_m / (METERS_PER_DEGREE * mid_lat.to_radians().cos());
    p.lat >= bounds.min_lat - dlat
        && p.lat <= bounds.max_lat + dlat
        && p.lon >= bounds.min_lon - dlon
        && p.lon <= bounds.max_lon + dlon
}

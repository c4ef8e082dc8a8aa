//! Scene geometry: shoebox rooms with optional full-height occluder walls,
//! and the poses (emitter/listener placements) the field is trained on.

use serde::{Deserialize, Serialize};

use crate::error::{NafError, Result};

/// A vertical wall segment spanning floor to ceiling, given by its two
/// footprint endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

/// Shoebox room with per-wall energy absorption and optional interior
/// occluder segments.
///
/// Absorption order: \[-x, +x, -y, +y, -z, +z\].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    pub absorption: [f64; 6],
    #[serde(default)]
    pub occluders: Vec<Occluder>,
}

impl SceneGeometry {
    pub fn shoebox(width: f64, depth: f64, height: f64, absorption: f64) -> Self {
        SceneGeometry {
            width,
            depth,
            height,
            absorption: [absorption; 6],
            occluders: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.depth > 0.0 && self.height > 0.0) {
            return Err(NafError::InvalidConfig(
                "room dimensions must be positive".into(),
            ));
        }
        for &a in &self.absorption {
            if !(0.0..1.0).contains(&a) {
                return Err(NafError::InvalidConfig(format!(
                    "absorption {a} outside [0,1)"
                )));
            }
        }
        for occ in &self.occluders {
            for (x, y) in [(occ.x0, occ.y0), (occ.x1, occ.y1)] {
                // Occluders may touch the exterior walls (closed footprint).
                if !(x >= 0.0 && x <= self.width && y >= 0.0 && y <= self.depth) {
                    return Err(NafError::InvalidConfig(format!(
                        "occluder endpoint ({x},{y}) outside footprint"
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when (x, y) lies inside the footprint (boundary excluded).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x > 0.0 && x < self.width && y > 0.0 && y < self.depth
    }

    /// Minimum distance from an interior point to any exterior wall or
    /// occluder segment.
    pub fn wall_distance(&self, x: f64, y: f64) -> Result<f64> {
        if !self.contains(x, y) {
            return Err(NafError::InvalidInput(format!(
                "({x},{y}) outside footprint"
            )));
        }
        let mut d = x.min(self.width - x).min(y).min(self.depth - y);
        for occ in &self.occluders {
            d = d.min(point_segment_distance(
                x, y, occ.x0, occ.y0, occ.x1, occ.y1,
            ));
        }
        Ok(d)
    }

    /// True when the open segment (ax,ay)-(bx,by) crosses any occluder.
    pub fn occluded(&self, ax: f64, ay: f64, bx: f64, by: f64) -> bool {
        self.occluders
            .iter()
            .any(|o| segments_intersect(ax, ay, bx, by, o.x0, o.y0, o.x1, o.y1))
    }
}

/// Discrete listener orientation; index i maps to i * 90 degrees.
pub const ORIENTATIONS: [usize; 4] = [0, 1, 2, 3];

pub fn orientation_radians(orientation: usize) -> f64 {
    (orientation as f64) * std::f64::consts::FRAC_PI_2
}

/// Emitter/listener placement. The ear is the channel axis of an IR record
/// and is carried separately where needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub emitter: (f64, f64),
    pub listener: (f64, f64),
    pub orientation: usize,
}

impl Pose {
    pub fn validate(&self, scene: &SceneGeometry) -> Result<()> {
        if self.orientation > 3 {
            return Err(NafError::InvalidInput(format!(
                "orientation {} outside 0..=3",
                self.orientation
            )));
        }
        for (label, (x, y)) in [("emitter", self.emitter), ("listener", self.listener)] {
            if !scene.contains(x, y) {
                return Err(NafError::InvalidInput(format!(
                    "{label} ({x},{y}) outside footprint"
                )));
            }
        }
        Ok(())
    }

    pub fn swapped(&self) -> Pose {
        Pose {
            emitter: self.listener,
            listener: self.emitter,
            orientation: self.orientation,
        }
    }
}

fn point_segment_distance(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

fn orient(ax: f64, ay: f64, bx: f64, by: f64, cx: f64, cy: f64) -> f64 {
    (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
}

fn on_segment(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> bool {
    px >= ax.min(bx) && px <= ax.max(bx) && py >= ay.min(by) && py <= ay.max(by)
}

/// Proper or degenerate intersection test for two closed 2D segments.
pub fn segments_intersect(
    ax: f64,
    ay: f64,
    bx: f64,
    by: f64,
    cx: f64,
    cy: f64,
    dx: f64,
    dy: f64,
) -> bool {
    let d1 = orient(cx, cy, dx, dy, ax, ay);
    let d2 = orient(cx, cy, dx, dy, bx, by);
    let d3 = orient(ax, ay, bx, by, cx, cy);
    let d4 = orient(ax, ay, bx, by, dx, dy);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(cx, cy, dx, dy, ax, ay))
        || (d2 == 0.0 && on_segment(cx, cy, dx, dy, bx, by))
        || (d3 == 0.0 && on_segment(ax, ay, bx, by, cx, cy))
        || (d4 == 0.0 && on_segment(ax, ay, bx, by, dx, dy))
}

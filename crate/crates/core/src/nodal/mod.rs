//! The nodal set `{U = 0}`: contour extraction, regular/singular
//! classification by the frequency jump, the reflection law across
//! interfaces, equal angles at junctions and flatness of the interface.

mod classify;
mod extract;
mod flatness;
mod reflection;
mod split;

use serde::{Deserialize, Serialize};

use crate::almgren::SegregatedConfig;
use crate::grid::{bicubic, distance, gradient, Grid2D, Point};

pub use classify::{
    branch_angles, classify_points, equal_angle_check, ClassifyOptions, Classification,
    SingularPointReport, N_STAR,
};
pub use extract::extract_nodal_set;
pub use flatness::{flatness_scan, FlatnessReport};
pub use reflection::{reflection_check, ReflectionReport, NONDEGENERACY_FRACTION};
pub use split::split_component;

/// A chain of interface points separating components `pair.0 < pair.1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Point>,
    pub pair: (usize, usize),
}

impl Polyline {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| distance(w[0], w[1])).sum()
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Zero level of the dominance field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalSet {
    pub grid: Grid2D,
    pub polylines: Vec<Polyline>,
    /// Centers of junction cells (three or more components, or a saddle of
    /// the dominance field), merged within 2h.
    pub singular_candidates: Vec<Point>,
    pub threshold: f64,
}

impl NodalSet {
    pub fn vertices(&self) -> impl Iterator<Item = Point> + '_ {
        self.polylines.iter().flat_map(|p| p.points.iter().copied())
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.polylines.iter().flat_map(|p| p.segments())
    }

    pub fn total_length(&self) -> f64 {
        self.polylines.iter().map(Polyline::length).sum()
    }

    /// Points every `spacing` of arc length along each polyline, starting
    /// half a spacing from its first vertex.
    pub fn sample(&self, spacing: f64) -> Vec<Point> {
        let mut out = Vec::new();
        for line in &self.polylines {
            let mut next = 0.5 * spacing;
            let mut walked = 0.0;
            for (a, b) in line.segments() {
                let len = distance(a, b);
                while next <= walked + len && len > 0.0 {
                    let t = (next - walked) / len;
                    out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    next += spacing;
                }
                walked += len;
            }
        }
        out
    }

    /// Closest point of the nodal set to `p`, its distance and the index of
    /// the polyline holding it.
    pub fn project(&self, p: Point) -> Option<(Point, f64, usize)> {
        let mut best: Option<(Point, f64, usize)> = None;
        for (l, line) in self.polylines.iter().enumerate() {
            for (a, b) in line.segments() {
                let q = closest_on_segment(p, a, b);
                let d = distance(p, q);
                if best.is_none_or(|(_, bd, _)| d < bd) {
                    best = Some((q, d, l));
                }
            }
            if line.points.len() == 1 {
                let d = distance(p, line.points[0]);
                if best.is_none_or(|(_, bd, _)| d < bd) {
                    best = Some((line.points[0], d, l));
                }
            }
        }
        best
    }

    /// Distance from `p` to the nearest singular candidate.
    pub fn distance_to_singular(&self, p: Point) -> f64 {
        self.singular_candidates
            .iter()
            .map(|&c| distance(p, c))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `max_i u_i` over polyline vertices (bicubic samples).
    pub fn max_vertex_value(&self, u: &SegregatedConfig) -> f64 {
        let g = u.grid();
        self.vertices()
            .map(|p| {
                u.components()
                    .iter()
                    .map(|c| bicubic(g, c.values(), p))
                    .fold(0.0_f64, f64::max)
            })
            .fold(0.0_f64, f64::max)
    }

    /// GeoJSON feature collection: one `LineString` per polyline and one
    /// `MultiPoint` for the singular candidates.
    pub fn to_geojson(&self) -> serde_json::Value {
        let mut features: Vec<serde_json::Value> = self
            .polylines
            .iter()
            .map(|l| {
                serde_json::json!({
                    "type": "Feature",
                    "geometry": { "type": "LineString", "coordinates": l.points },
                    "properties": { "components": [l.pair.0, l.pair.1] },
                })
            })
            .collect();
        features.push(serde_json::json!({
            "type": "Feature",
            "geometry": { "type": "MultiPoint", "coordinates": self.singular_candidates },
            "properties": { "kind": "singular_candidates" },
        }));
        serde_json::json!({ "type": "FeatureCollection", "features": features })
    }
}

pub(crate) fn closest_on_segment(p: Point, a: Point, b: Point) -> Point {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return a;
    }
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    [a[0] + t * d[0], a[1] + t * d[1]]
}

/// Largest central-difference gradient magnitude over all components.
pub fn lipschitz_estimate(u: &SegregatedConfig) -> f64 {
    u.components()
        .iter()
        .map(|c| gradient(c).magnitude().max())
        .fold(0.0_f64, f64::max)
}

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::almgren::SegregatedConfig;
use crate::error::Result;
use crate::grid::{check_ball, distance, Point};

use super::NodalSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub center: Point,
    pub radius: f64,
    /// Direction of the best line through the center, in `[0, π)`.
    pub angle: f64,
    /// Symmetric Hausdorff distance between the nodal set and the line
    /// inside the ball, divided by the radius; 1 when the ball holds no
    /// nodal points.
    pub delta: f64,
}

const ANGLE_SCAN: usize = 720;

/// For each radius, the line through `x0` minimizing the largest distance
/// from the nodal set in `B_r(x0)` and the resulting normalized symmetric
/// Hausdorff distance.
pub fn flatness_scan(
    u: &SegregatedConfig,
    nodal: &NodalSet,
    x0: Point,
    radii: &[f64],
) -> Result<Vec<FlatnessReport>> {
    let h = u.grid().h();
    for &r in radii {
        check_ball(u.grid(), x0, r, 0.0)?;
    }
    let r_top = radii.iter().copied().fold(0.0, f64::max);
    let dense = densify(nodal, x0, r_top, 0.25 * h);
    Ok(radii
        .iter()
        .map(|&r| {
            let pts: Vec<Point> = dense
                .iter()
                .copied()
                .filter(|&p| distance(p, x0) <= r)
                .collect();
            if pts.is_empty() {
                return FlatnessReport {
                    center: x0,
                    radius: r,
                    angle: 0.0,
                    delta: 1.0,
                };
            }
            let spread = |theta: f64| -> f64 {
                let (s, c) = theta.sin_cos();
                pts.iter()
                    .map(|p| ((p[0] - x0[0]) * s - (p[1] - x0[1]) * c).abs())
                    .fold(0.0, f64::max)
            };
            let step = PI / ANGLE_SCAN as f64;
            let mut best = (0.0, f64::INFINITY);
            for k in 0..ANGLE_SCAN {
                let t = k as f64 * step;
                let v = spread(t);
                if v < best.1 {
                    best = (t, v);
                }
            }
            // golden-section refinement inside the winning bracket
            let (mut a, mut b) = (best.0 - step, best.0 + step);
            let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
            for _ in 0..40 {
                let c = b - phi * (b - a);
                let d = a + phi * (b - a);
                if spread(c) < spread(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let mid = 0.5 * (a + b);
            let theta = if spread(mid) < best.1 { mid } else { best.0 };
            let one_sided = spread(theta);
            // distance from the line chord back to the nodal points
            let (s, c) = theta.sin_cos();
            let n = (2.0 * r / (0.5 * h)).ceil() as usize;
            let mut back = 0.0_f64;
            for k in 0..=n {
                let t = -r + 2.0 * r * k as f64 / n as f64;
                let q = [x0[0] + t * c, x0[1] + t * s];
                let d = pts.iter().map(|&p| distance(p, q)).fold(f64::INFINITY, f64::min);
                back = back.max(d);
            }
            FlatnessReport {
                center: x0,
                radius: r,
                angle: theta.rem_euclid(PI),
                delta: (one_sided.max(back) / r).min(1.0),
            }
        })
        .collect())
}

/// Polyline points within `r` of `x0`, resampled so consecutive points are
/// at most `spacing` apart.
fn densify(nodal: &NodalSet, x0: Point, r: f64, spacing: f64) -> Vec<Point> {
    let mut out = Vec::new();
    for (a, b) in nodal.segments() {
        let q = super::closest_on_segment(x0, a, b);
        if distance(q, x0) > r {
            continue;
        }
        let n = (distance(a, b) / spacing).ceil().max(1.0) as usize;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            if distance(p, x0) <= r {
                out.push(p);
            }
        }
    }
    out
}

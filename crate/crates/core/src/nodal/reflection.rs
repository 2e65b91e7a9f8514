use serde::{Deserialize, Serialize};

use crate::almgren::SegregatedConfig;
use crate::error::{Error, Result};
use crate::grid::{bicubic, bicubic_gradient, distance, Point};

use super::{lipschitz_estimate, NodalSet};

/// One-sided gradients below this fraction of the Lipschitz estimate count
/// as degenerate.
pub const NONDEGENERACY_FRACTION: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionReport {
    /// Interface point closest to the requested location.
    pub base: Point,
    pub normal: Point,
    /// `|∇U|` extrapolated to the interface from the `+normal` side.
    pub g_plus: f64,
    pub g_minus: f64,
    /// `|g+ - g-| / max(g+, g-)`.
    pub mismatch: f64,
    pub tau_grad: f64,
    /// Both one-sided gradients are at least `tau_grad`.
    pub nondegenerate: bool,
}

/// Compares `|∇U|` on the two sides of the interface near `x0`. Gradients
/// of the locally dominant component are sampled at distances `s` and `2s`
/// along the polyline normal and extrapolated linearly to the interface.
pub fn reflection_check(
    u: &SegregatedConfig,
    nodal: &NodalSet,
    x0: Point,
    s: f64,
) -> Result<ReflectionReport> {
    let g = u.grid();
    let h = g.h();
    if !(s >= 2.0 * h * (1.0 - 1e-9) && s <= 6.0 * h * (1.0 + 1e-9)) {
        return Err(Error::InvalidParams(format!(
            "probe distance {s} outside [2h, 6h] (h = {h})"
        )));
    }
    let (base, off, line) = nodal.project(x0).ok_or(Error::EmptyNodalSet)?;
    if off > 2.0 * h {
        return Err(Error::InvalidParams(format!(
            "({}, {}) is {off} from the nodal set",
            x0[0], x0[1]
        )));
    }
    let sing = nodal.distance_to_singular(base);
    if sing < 10.0 * h {
        return Err(Error::TooCloseToSingular {
            distance: sing,
            required: 10.0 * h,
        });
    }

    // principal direction of the nearby polyline vertices
    let near: Vec<Point> = nodal.polylines[line]
        .points
        .iter()
        .copied()
        .filter(|&p| distance(p, base) <= 4.0 * h)
        .collect();
    let m = near.len().max(1) as f64;
    let mean = near.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0] / m, a[1] + p[1] / m]);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in &near {
        let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let normal = [-theta.sin(), theta.cos()];

    let one_side = |sign: f64| -> Result<f64> {
        let probe = |t: f64| -> Result<f64> {
            let p = [base[0] + sign * t * normal[0], base[1] + sign * t * normal[1]];
            if !g.contains(p, 2.0 * h) {
                return Err(Error::BallOutOfDomain {
                    center: base,
                    radius: t,
                    margin: 2.0 * h,
                });
            }
            let c = u
                .components()
                .iter()
                .map(|c| bicubic(g, c.values(), p))
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b })
                .0;
            let d = bicubic_gradient(g, u.component(c).values(), p);
            Ok(d[0].hypot(d[1]))
        };
        Ok(2.0 * probe(s)? - probe(2.0 * s)?)
    };
    let g_plus = one_side(1.0)?;
    let g_minus = one_side(-1.0)?;
    let top = g_plus.max(g_minus);
    let mismatch = if top > 0.0 {
        (g_plus - g_minus).abs() / top
    } else {
        0.0
    };
    let tau_grad = NONDEGENERACY_FRACTION * lipschitz_estimate(u);
    Ok(ReflectionReport {
        base,
        normal,
        g_plus,
        g_minus,
        mismatch,
        tau_grad,
        nondegenerate: g_plus.min(g_minus) >= tau_grad,
    })
}

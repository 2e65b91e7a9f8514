//! Quadrature over disks and circles.
//!
//! Disk integrals use the dual cell `[x - h/2, x + h/2] x [y - h/2, y + h/2]`
//! of every node. Cells fully inside contribute `f h^2`; cells cut by the
//! circle contribute their exact intersection area plus a first-order
//! correction `grad f . (centroid - node)`, with area and centroid obtained
//! by Green's theorem along the clipped boundary. Both are smooth in the
//! radius, so `r -> E(r)` can be differentiated numerically.

use std::f64::consts::PI;

use super::{Grid2D, Point, ScalarField};
use crate::error::{Error, Result};

/// Area and first moments (about the disk center) of a disk/cell intersection.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellMoments {
    pub area: f64,
    pub mx: f64,
    pub my: f64,
}

/// Smallest admissible number of circle samples for radius `r` and spacing `h`.
pub fn min_circle_samples(r: f64, h: f64) -> usize {
    ((8.0 * PI * r / h).ceil() as usize).max(64)
}

/// Errors unless the disk of radius `r` plus `margin` lies inside the grid.
pub fn check_ball(grid: &Grid2D, center: Point, r: f64, margin: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) || !grid.contains(center, r + margin) {
        return Err(Error::BallOutOfDomain {
            center,
            radius: r,
            margin,
        });
    }
    Ok(())
}

fn segment_moments(a: Point, b: Point, m: &mut CellMoments) {
    m.area += 0.5 * (a[0] * b[1] - b[0] * a[1]);
    m.mx += (b[1] - a[1]) * (a[0] * a[0] + a[0] * b[0] + b[0] * b[0]) / 6.0;
    m.my -= (b[0] - a[0]) * (a[1] * a[1] + a[1] * b[1] + b[1] * b[1]) / 6.0;
}

fn arc_moments(r: f64, a: f64, b: f64, m: &mut CellMoments) {
    let s = |t: f64| {
        let st = t.sin();
        st - st * st * st / 3.0
    };
    let c = |t: f64| {
        let ct = t.cos();
        -ct + ct * ct * ct / 3.0
    };
    let r3 = r * r * r;
    m.area += 0.5 * r * r * (b - a);
    m.mx += 0.5 * r3 * (s(b) - s(a));
    m.my += 0.5 * r3 * (c(b) - c(a));
}

/// Exact area and first moments of `{|q| < r} ∩ [x0, x1] x [y0, y1]`, with the
/// disk centered at the origin.
pub fn disk_cell_moments(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> CellMoments {
    let mut m = CellMoments::default();
    let r2 = r * r;

    // rectangle edges, counter-clockwise, clipped to the disk
    let corners = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
    for e in 0..4 {
        let a = corners[e];
        let b = corners[(e + 1) % 4];
        let d = [b[0] - a[0], b[1] - a[1]];
        let qa = d[0] * d[0] + d[1] * d[1];
        let qb = 2.0 * (a[0] * d[0] + a[1] * d[1]);
        let qc = a[0] * a[0] + a[1] * a[1] - r2;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc <= 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        let s0 = ((-qb - sq) / (2.0 * qa)).max(0.0);
        let s1 = ((-qb + sq) / (2.0 * qa)).min(1.0);
        if s1 <= s0 {
            continue;
        }
        let p0 = [a[0] + s0 * d[0], a[1] + s0 * d[1]];
        let p1 = [a[0] + s1 * d[0], a[1] + s1 * d[1]];
        segment_moments(p0, p1, &mut m);
    }

    // circle arcs lying inside the rectangle
    let mut angles: Vec<f64> = Vec::with_capacity(10);
    let mut push_line = |c: f64, vertical: bool| {
        if c.abs() < r {
            let t = if vertical { (c / r).acos() } else { (c / r).asin() };
            if vertical {
                angles.push(t);
                angles.push(2.0 * PI - t);
            } else {
                angles.push(t.rem_euclid(2.0 * PI));
                angles.push((PI - t).rem_euclid(2.0 * PI));
            }
        }
    };
    push_line(x0, true);
    push_line(x1, true);
    push_line(y0, false);
    push_line(y1, false);
    angles.push(0.0);
    angles.push(2.0 * PI);
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in angles.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let t = 0.5 * (a + b);
        let (x, y) = (r * t.cos(), r * t.sin());
        if x > x0 && x < x1 && y > y0 && y < y1 {
            arc_moments(r, a, b, &mut m);
        }
    }
    m
}

/// Integral over the disk `B_r(center)` of a nodal quantity given by index.
///
/// `f` is called on nodes inside the disk and on the four neighbours of nodes
/// whose dual cell is cut by the circle.
pub fn ball_integral_with(
    grid: &Grid2D,
    center: Point,
    r: f64,
    f: impl Fn(usize) -> f64,
) -> Result<f64> {
    let h = grid.h();
    check_ball(grid, center, r, 2.0 * h)?;
    let half = 0.5 * h;
    let q = grid.to_index_space(center);
    let reach = r / h + 1.0;
    let i_lo = (q[0] - reach).floor().max(1.0) as usize;
    let i_hi = ((q[0] + reach).ceil() as usize).min(grid.nx() - 2);
    let j_lo = (q[1] - reach).floor().max(1.0) as usize;
    let j_hi = ((q[1] + reach).ceil() as usize).min(grid.ny() - 2);
    let nx = grid.nx();
    let r2 = r * r;
    let cell = h * h;

    let mut acc = 0.0;
    for j in j_lo..=j_hi {
        let p = grid.coords(0, j);
        let dy = p[1] - center[1];
        let (ylo, yhi) = (dy - half, dy + half);
        let ny_near = if ylo > 0.0 {
            ylo
        } else if yhi < 0.0 {
            -yhi
        } else {
            0.0
        };
        let ny_far = ylo.abs().max(yhi.abs());
        for i in i_lo..=i_hi {
            let dx = grid.origin()[0] + i as f64 * h - center[0];
            let (xlo, xhi) = (dx - half, dx + half);
            let nx_near = if xlo > 0.0 {
                xlo
            } else if xhi < 0.0 {
                -xhi
            } else {
                0.0
            };
            if nx_near * nx_near + ny_near * ny_near >= r2 {
                continue;
            }
            let k = j * nx + i;
            let nx_far = xlo.abs().max(xhi.abs());
            if nx_far * nx_far + ny_far * ny_far <= r2 {
                acc += f(k) * cell;
                continue;
            }
            let m = disk_cell_moments(r, xlo, xhi, ylo, yhi);
            if m.area <= 0.0 {
                continue;
            }
            let gx = (f(k + 1) - f(k - 1)) / (2.0 * h);
            let gy = (f(k + nx) - f(k - nx)) / (2.0 * h);
            acc += m.area * f(k) + (m.mx - m.area * dx) * gx + (m.my - m.area * dy) * gy;
        }
    }
    Ok(acc)
}

/// `∫_{B_r(center)} f`.
pub fn ball_integral(f: &ScalarField, center: Point, r: f64) -> Result<f64> {
    let v = f.values();
    ball_integral_with(f.grid(), center, r, |k| v[k])
}

/// Trapezoid rule on `n` equispaced angles of `∂B_r(center)`; returns
/// `∫ sample dσ`. The sample count is raised to [`min_circle_samples`].
pub fn circle_integral_with(
    grid: &Grid2D,
    center: Point,
    r: f64,
    n_samples: usize,
    sample: impl Fn(Point) -> f64,
) -> Result<f64> {
    check_ball(grid, center, r, 2.0 * grid.h())?;
    let n = n_samples.max(min_circle_samples(r, grid.h()));
    let dt = 2.0 * PI / n as f64;
    let sum: f64 = (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            sample([center[0] + r * t.cos(), center[1] + r * t.sin()])
        })
        .sum();
    Ok(sum * r * dt)
}

/// `∫_{∂B_r(center)} f dσ` with bicubic sampling.
pub fn circle_integral(f: &ScalarField, center: Point, r: f64, n_samples: usize) -> Result<f64> {
    circle_integral_with(f.grid(), center, r, n_samples, |p| f.sample(p))
}

/// Outward radial derivative `<∇f, ν>` at equispaced circle samples,
/// returned as `(angle, value)` pairs.
pub fn radial_derivative(
    f: &ScalarField,
    center: Point,
    r: f64,
    n_samples: usize,
) -> Result<Vec<(f64, f64)>> {
    check_ball(f.grid(), center, r, 2.0 * f.grid().h())?;
    let n = n_samples.max(min_circle_samples(r, f.grid().h()));
    let dt = 2.0 * PI / n as f64;
    Ok((0..n)
        .map(|k| {
            let t = k as f64 * dt;
            let (c, s) = (t.cos(), t.sin());
            let g = f.sample_gradient([center[0] + r * c, center[1] + r * s]);
            (t, g[0] * c + g[1] * s)
        })
        .collect())
}

//! Keys cubic convolution (a = -1/2) on the node lattice.

use super::{Grid2D, Point};

#[inline]
fn weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

#[inline]
fn weight_derivatives(t: f64) -> [f64; 4] {
    let t2 = t * t;
    [
        0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
        0.5 * (9.0 * t2 - 10.0 * t),
        0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
        0.5 * (3.0 * t2 - 2.0 * t),
    ]
}

/// Base node of the 4-point stencil and the local offset in `[0, 1]`
/// (outside that range only when the point is within one cell of the edge).
#[inline]
fn stencil(q: f64, n: usize) -> (usize, f64) {
    let base = q.floor().clamp(1.0, (n - 3) as f64);
    (base as usize - 1, q - base)
}

/// Bicubic interpolation of nodal `values` at `p`.
pub fn bicubic(grid: &Grid2D, values: &[f64], p: Point) -> f64 {
    let q = grid.to_index_space(p);
    let (i0, tx) = stencil(q[0], grid.nx());
    let (j0, ty) = stencil(q[1], grid.ny());
    let wx = weights(tx);
    let wy = weights(ty);
    let nx = grid.nx();
    let mut acc = 0.0;
    for (b, wyb) in wy.iter().enumerate() {
        let row = (j0 + b) * nx + i0;
        let s = wx[0] * values[row]
            + wx[1] * values[row + 1]
            + wx[2] * values[row + 2]
            + wx[3] * values[row + 3];
        acc += wyb * s;
    }
    acc
}

/// Gradient of the bicubic interpolant at `p`.
pub fn bicubic_gradient(grid: &Grid2D, values: &[f64], p: Point) -> [f64; 2] {
    let q = grid.to_index_space(p);
    let (i0, tx) = stencil(q[0], grid.nx());
    let (j0, ty) = stencil(q[1], grid.ny());
    let wx = weights(tx);
    let wy = weights(ty);
    let dx = weight_derivatives(tx);
    let dy = weight_derivatives(ty);
    let nx = grid.nx();
    let (mut gx, mut gy) = (0.0, 0.0);
    for b in 0..4 {
        let row = (j0 + b) * nx + i0;
        let v = [values[row], values[row + 1], values[row + 2], values[row + 3]];
        let sx = dx[0] * v[0] + dx[1] * v[1] + dx[2] * v[2] + dx[3] * v[3];
        let s = wx[0] * v[0] + wx[1] * v[1] + wx[2] * v[2] + wx[3] * v[3];
        gx += wy[b] * sx;
        gy += dy[b] * s;
    }
    [gx / grid.h(), gy / grid.h()]
}

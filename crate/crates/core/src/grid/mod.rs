//! Uniform 2D node grids, scalar and vector fields, finite differences and
//! ball/circle quadrature.
//!
//! Nodes are stored row-major with `x` varying fastest: node `(i, j)` lives at
//! `origin + (i h, j h)` and has flat index `j * nx + i`.

mod interp;
pub mod io;
mod quadrature;

pub use interp::{bicubic, bicubic_gradient};
pub use quadrature::{
    ball_integral, ball_integral_with, check_ball, circle_integral, circle_integral_with,
    disk_cell_moments, min_circle_samples, radial_derivative, CellMoments,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Uniform square-cell grid of `nx * ny` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    h: f64,
    origin: Point,
}

impl Grid2D {
    pub const MIN_NODES: usize = 16;

    pub fn new(nx: usize, ny: usize, h: f64, origin: Point) -> Result<Self> {
        if nx < Self::MIN_NODES || ny < Self::MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {} nodes per axis, got {nx} x {ny}",
                Self::MIN_NODES
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { nx, ny, h, origin })
    }

    /// Square grid `[c - a, c + a]^2` split into `cells` intervals per axis.
    pub fn square(center: Point, half_width: f64, cells: usize) -> Result<Self> {
        let h = 2.0 * half_width / cells as f64;
        Self::new(
            cells + 1,
            cells + 1,
            h,
            [center[0] - half_width, center[1] - half_width],
        )
    }

    /// `[0, 1]^2` with `cells` intervals per axis.
    pub fn unit_square(cells: usize) -> Result<Self> {
        Self::square([0.5, 0.5], 0.5, cells)
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn origin(&self) -> Point {
        self.origin
    }

    /// Physical side lengths `((nx-1) h, (ny-1) h)`.
    pub fn extent(&self) -> [f64; 2] {
        [(self.nx - 1) as f64 * self.h, (self.ny - 1) as f64 * self.h]
    }

    /// Upper corner of the grid.
    pub fn max_corner(&self) -> Point {
        let e = self.extent();
        [self.origin[0] + e[0], self.origin[1] + e[1]]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn coords(&self, i: usize, j: usize) -> Point {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    #[inline]
    pub fn coords_of(&self, idx: usize) -> Point {
        let (i, j) = self.ij(idx);
        self.coords(i, j)
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Fractional node coordinates of a point.
    #[inline]
    pub fn to_index_space(&self, p: Point) -> [f64; 2] {
        [
            (p[0] - self.origin[0]) / self.h,
            (p[1] - self.origin[1]) / self.h,
        ]
    }

    /// True when `p` lies at least `margin` inside the grid rectangle.
    pub fn contains(&self, p: Point, margin: f64) -> bool {
        let hi = self.max_corner();
        p[0] - margin >= self.origin[0] - 1e-12 * self.h
            && p[1] - margin >= self.origin[1] - 1e-12 * self.h
            && p[0] + margin <= hi[0] + 1e-12 * self.h
            && p[1] + margin <= hi[1] + 1e-12 * self.h
    }

    /// Distance from `p` to the grid rectangle boundary (negative outside).
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        let hi = self.max_corner();
        (p[0] - self.origin[0])
            .min(p[1] - self.origin[1])
            .min(hi[0] - p[0])
            .min(hi[1] - p[1])
    }

    /// Nearest node to `p`, clamped to the grid.
    pub fn nearest_node(&self, p: Point) -> (usize, usize) {
        let q = self.to_index_space(p);
        let i = q[0].round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = q[1].round().clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|k| {
                let p = grid.coords_of(k);
                f(p[0], p[1])
            })
            .collect();
        Self::new(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Bicubic (Keys) interpolation at an arbitrary point.
    pub fn sample(&self, p: Point) -> f64 {
        bicubic(&self.grid, &self.values, p)
    }

    /// Gradient of the bicubic interpolant at `p`.
    pub fn sample_gradient(&self, p: Point) -> [f64; 2] {
        bicubic_gradient(&self.grid, &self.values, p)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.map(|v| v * factor)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Discrete integral `h^2 * sum(values)` over all nodes.
    pub fn sum_integral(&self) -> f64 {
        self.grid.h * self.grid.h * self.values.iter().sum::<f64>()
    }
}

/// Two values (x- and y-derivative samples) per node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid2D,
    values: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn new(grid: Grid2D, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values
            .iter()
            .position(|v| !(v[0].is_finite() && v[1].is_finite()))
        {
            return Err(Error::NonFinite(k));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> [f64; 2] {
        self.values[self.grid.idx(i, j)]
    }

    /// Per-node Euclidean norm.
    pub fn magnitude(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v[0].hypot(v[1])).collect(),
        }
    }
}

/// A field whose boundary nodes carry no value.
///
/// Boundary entries hold `0.0` and are marked invalid in `valid`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedField {
    pub field: ScalarField,
    pub valid: Vec<bool>,
}

impl MaskedField {
    /// Iterator over `(index, value)` for valid nodes.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.field
            .values()
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter(|(_, (_, &ok))| ok)
            .map(|(k, (&v, _))| (k, v))
    }

    pub fn max_abs_valid(&self) -> f64 {
        self.iter_valid().fold(0.0_f64, |m, (_, v)| m.max(v.abs()))
    }
}

/// One-dimensional derivative along a line of samples with stride `stride`,
/// central in the interior and second-order one-sided at the ends.
#[inline]
pub(crate) fn diff_along(
    values: &[f64],
    k: usize,
    pos: usize,
    n: usize,
    stride: usize,
    h: f64,
) -> f64 {
    if pos == 0 {
        (-3.0 * values[k] + 4.0 * values[k + stride] - values[k + 2 * stride]) / (2.0 * h)
    } else if pos + 1 == n {
        (3.0 * values[k] - 4.0 * values[k - stride] + values[k - 2 * stride]) / (2.0 * h)
    } else {
        (values[k + stride] - values[k - stride]) / (2.0 * h)
    }
}

/// Central differences in the interior, second-order one-sided differences
/// on boundary nodes.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid;
    let v = &f.values;
    let values = (0..g.len())
        .map(|k| {
            let (i, j) = g.ij(k);
            [
                diff_along(v, k, i, g.nx, 1, g.h),
                diff_along(v, k, j, g.ny, g.nx, g.h),
            ]
        })
        .collect();
    VectorField { grid: g, values }
}

/// Five-point Laplacian on interior nodes; boundary nodes are flagged invalid.
pub fn laplacian(f: &ScalarField) -> MaskedField {
    let g = f.grid;
    let h2 = g.h * g.h;
    let v = &f.values;
    let mut out = vec![0.0; g.len()];
    let mut valid = vec![false; g.len()];
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let k = g.idx(i, j);
            out[k] = (v[k + 1] + v[k - 1] + v[k + g.nx] + v[k - g.nx] - 4.0 * v[k]) / h2;
            valid[k] = true;
        }
    }
    MaskedField {
        field: ScalarField {
            grid: g,
            values: out,
        },
        valid,
    }
}

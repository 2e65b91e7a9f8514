//! Sparse symmetric solves for `sigma - Δ_h` on a set of active nodes.
//!
//! Inactive nodes carry Dirichlet data. A neighbour across the Dirichlet
//! boundary contributes `u_p / (theta h^2)` to the diagonal, where `theta` is
//! the fraction of the grid edge lying inside the active region (1 for a
//! staircase boundary). The system is solved by conjugate gradients
//! preconditioned with one geometric multigrid V-cycle (red-black
//! Gauss–Seidel smoothing, full-weighting restriction, bilinear
//! prolongation). All reductions are sequential, so results are
//! bit-reproducible.

use crate::error::{Error, Result};
use crate::grid::Grid2D;

/// Smallest admissible edge fraction for cut boundaries.
pub const MIN_THETA: f64 = 1e-2;

const PRE_SWEEPS: usize = 2;
const COARSEST_SWEEPS: usize = 40;

/// Edge fractions toward the E, W, N, S neighbours.
pub type Fractions = [f64; 4];

#[derive(Debug, Clone)]
struct Level {
    nx: usize,
    ny: usize,
    inv_h2: f64,
    active: Vec<bool>,
    diag: Vec<f64>,
}

impl Level {
    fn len(&self) -> usize {
        self.nx * self.ny
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nx = self.nx;
        for k in 0..self.len() {
            y[k] = if self.active[k] {
                self.diag[k] * x[k] - self.inv_h2 * self.neighbour_sum(x, k, nx)
            } else {
                0.0
            };
        }
    }

    #[inline]
    fn neighbour_sum(&self, x: &[f64], k: usize, nx: usize) -> f64 {
        let a = &self.active;
        let mut s = 0.0;
        if a[k + 1] {
            s += x[k + 1];
        }
        if a[k - 1] {
            s += x[k - 1];
        }
        if a[k + nx] {
            s += x[k + nx];
        }
        if a[k - nx] {
            s += x[k - nx];
        }
        s
    }

    fn sweep_color(&self, x: &mut [f64], b: &[f64], color: usize) {
        let nx = self.nx;
        for j in 1..self.ny - 1 {
            let start = 1 + (j + 1 + color) % 2;
            let mut i = start;
            while i < nx - 1 {
                let k = j * nx + i;
                if self.active[k] {
                    x[k] = (b[k] + self.inv_h2 * self.neighbour_sum(x, k, nx)) / self.diag[k];
                }
                i += 2;
            }
        }
    }

    /// Red then black (`forward`) or black then red.
    fn sweep(&self, x: &mut [f64], b: &[f64], forward: bool) {
        if forward {
            self.sweep_color(x, b, 0);
            self.sweep_color(x, b, 1);
        } else {
            self.sweep_color(x, b, 1);
            self.sweep_color(x, b, 0);
        }
    }

    fn can_coarsen(&self) -> bool {
        (self.nx - 1).is_multiple_of(2) && (self.ny - 1).is_multiple_of(2) && self.nx.min(self.ny) > 9
    }

    fn coarsen(&self, sigma: &[f64]) -> (Level, Vec<f64>) {
        let (cx, cy) = ((self.nx - 1) / 2 + 1, (self.ny - 1) / 2 + 1);
        let inv_h2 = self.inv_h2 / 4.0;
        let mut active = vec![false; cx * cy];
        let mut sig = vec![0.0; cx * cy];
        for jc in 1..cy - 1 {
            for ic in 1..cx - 1 {
                let kf = 2 * jc * self.nx + 2 * ic;
                let kc = jc * cx + ic;
                active[kc] = self.active[kf];
                sig[kc] = full_weight(sigma, kf, self.nx);
            }
        }
        let diag = sig
            .iter()
            .zip(&active)
            .map(|(s, &a)| if a { s + 4.0 * inv_h2 } else { 0.0 })
            .collect();
        (
            Level {
                nx: cx,
                ny: cy,
                inv_h2,
                active,
                diag,
            },
            sig,
        )
    }
}

#[inline]
fn full_weight(v: &[f64], k: usize, nx: usize) -> f64 {
    (4.0 * v[k]
        + 2.0 * (v[k + 1] + v[k - 1] + v[k + nx] + v[k - nx])
        + v[k + nx + 1]
        + v[k + nx - 1]
        + v[k - nx + 1]
        + v[k - nx - 1])
        / 16.0
}

/// Convergence summary of a linear solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// The operator `diag(sigma) - Δ_h` restricted to active nodes.
#[derive(Debug, Clone)]
pub struct ShiftedLaplacian {
    grid: Grid2D,
    levels: Vec<Level>,
}

impl ShiftedLaplacian {
    /// `sigma` must be nonnegative. Grid-boundary nodes are always inactive.
    /// `theta` gives per-direction edge fractions; `None` means staircase.
    pub fn new(
        grid: Grid2D,
        active: &[bool],
        sigma: &[f64],
        theta: Option<&[Fractions]>,
    ) -> Result<Self> {
        let n = grid.len();
        if active.len() != n || sigma.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: active.len().min(sigma.len()),
            });
        }
        if let Some(k) = sigma.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::NonFinite(k));
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let mut act = active.to_vec();
        for (k, a) in act.iter_mut().enumerate() {
            let (i, j) = grid.ij(k);
            if grid.is_boundary(i, j) {
                *a = false;
            }
        }
        let mut diag = vec![0.0; n];
        for k in 0..n {
            if !act[k] {
                continue;
            }
            let nbrs = [k + 1, k - 1, k + nx, k - nx];
            let mut d = sigma[k];
            for (dir, &q) in nbrs.iter().enumerate() {
                d += if act[q] {
                    inv_h2
                } else {
                    let t = theta.map_or(1.0, |t| t[k][dir].clamp(MIN_THETA, 1.0));
                    inv_h2 / t
                };
            }
            diag[k] = d;
        }
        let mut levels = vec![Level {
            nx,
            ny,
            inv_h2,
            active: act,
            diag,
        }];
        let mut sig = sigma.to_vec();
        while levels.last().unwrap().can_coarsen() {
            let (coarse, s) = levels.last().unwrap().coarsen(&sig);
            if !coarse.active.iter().any(|&a| a) {
                break;
            }
            levels.push(coarse);
            sig = s;
        }
        Ok(Self { grid, levels })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn active(&self) -> &[bool] {
        &self.levels[0].active
    }

    /// `y = A x` on active nodes, 0 elsewhere.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.levels[0].apply(x, y);
    }

    /// Right-hand side contribution of Dirichlet values stored at inactive
    /// neighbours of active nodes (staircase coupling `g / h^2`).
    pub fn add_dirichlet(&self, values: &[f64], b: &mut [f64]) {
        let l = &self.levels[0];
        let nx = l.nx;
        for k in 0..l.len() {
            if !l.active[k] {
                continue;
            }
            for q in [k + 1, k - 1, k + nx, k - nx] {
                if !l.active[q] {
                    b[k] += l.inv_h2 * values[q];
                }
            }
        }
    }

    fn vcycle(&self, lvl: usize, b: &[f64], x: &mut [f64]) {
        let l = &self.levels[lvl];
        x.iter_mut().for_each(|v| *v = 0.0);
        if lvl + 1 == self.levels.len() {
            for _ in 0..COARSEST_SWEEPS {
                l.sweep(x, b, true);
            }
            for _ in 0..COARSEST_SWEEPS {
                l.sweep(x, b, false);
            }
            return;
        }
        for _ in 0..PRE_SWEEPS {
            l.sweep(x, b, true);
        }
        let mut r = vec![0.0; l.len()];
        l.apply(x, &mut r);
        for k in 0..l.len() {
            r[k] = if l.active[k] { b[k] - r[k] } else { 0.0 };
        }
        let c = &self.levels[lvl + 1];
        let mut bc = vec![0.0; c.len()];
        for jc in 1..c.ny - 1 {
            for ic in 1..c.nx - 1 {
                let kc = jc * c.nx + ic;
                if c.active[kc] {
                    bc[kc] = full_weight(&r, 2 * jc * l.nx + 2 * ic, l.nx);
                }
            }
        }
        let mut ec = vec![0.0; c.len()];
        self.vcycle(lvl + 1, &bc, &mut ec);
        for j in 1..l.ny - 1 {
            for i in 1..l.nx - 1 {
                let k = j * l.nx + i;
                if !l.active[k] {
                    continue;
                }
                let (ic, jc) = (i / 2, j / 2);
                let at = |a: usize, b: usize| ec[b * c.nx + a];
                x[k] += match (i % 2, j % 2) {
                    (0, 0) => at(ic, jc),
                    (1, 0) => 0.5 * (at(ic, jc) + at(ic + 1, jc)),
                    (0, 1) => 0.5 * (at(ic, jc) + at(ic, jc + 1)),
                    _ => 0.25 * (at(ic, jc) + at(ic + 1, jc) + at(ic, jc + 1) + at(ic + 1, jc + 1)),
                };
            }
        }
        for _ in 0..PRE_SWEEPS {
            l.sweep(x, b, false);
        }
    }

    /// Solves `A x = b` on active nodes; `x` holds the initial guess and
    /// keeps its inactive entries. Stops when `|b - A x| <= tol |b|` (l2).
    pub fn solve(&self, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
        self.solve_with(b, x, |_| tol, max_iter)
    }

    /// As [`Self::solve`] with the relative tolerance chosen by `tol` from
    /// the relative residual of the initial guess. At least one iteration
    /// runs whenever that residual is nonzero.
    pub fn solve_with(
        &self,
        b: &[f64],
        x: &mut [f64],
        tol: impl Fn(f64) -> f64,
        max_iter: usize,
    ) -> Result<SolveStats> {
        let l = &self.levels[0];
        let n = l.len();
        let dot = |a: &[f64], c: &[f64]| -> f64 {
            let mut s = 0.0;
            for k in 0..n {
                if l.active[k] {
                    s += a[k] * c[k];
                }
            }
            s
        };
        let bnorm = dot(b, b).sqrt();
        if bnorm == 0.0 {
            for k in 0..n {
                if l.active[k] {
                    x[k] = 0.0;
                }
            }
            return Ok(SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            });
        }
        let mut sol: Vec<f64> = (0..n).map(|k| if l.active[k] { x[k] } else { 0.0 }).collect();
        let mut r = vec![0.0; n];
        l.apply(&sol, &mut r);
        for k in 0..n {
            r[k] = if l.active[k] { b[k] - r[k] } else { 0.0 };
        }
        let mut rel = dot(&r, &r).sqrt() / bnorm;
        let target = tol(rel);
        let mut z = vec![0.0; n];
        let mut ap = vec![0.0; n];
        let mut iterations = 0;
        if rel > 0.0 {
            self.vcycle(0, &r, &mut z);
            let mut p = z.clone();
            let mut rz = dot(&r, &z);
            loop {
                if iterations >= max_iter {
                    return Err(Error::NoConvergence {
                        iterations,
                        residual: rel,
                    });
                }
                iterations += 1;
                l.apply(&p, &mut ap);
                let alpha = rz / dot(&p, &ap);
                for k in 0..n {
                    sol[k] += alpha * p[k];
                    r[k] -= alpha * ap[k];
                }
                rel = dot(&r, &r).sqrt() / bnorm;
                if rel <= target {
                    break;
                }
                self.vcycle(0, &r, &mut z);
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                for k in 0..n {
                    p[k] = z[k] + beta * p[k];
                }
            }
        }
        for k in 0..n {
            if l.active[k] {
                x[k] = sol[k];
            }
        }
        Ok(SolveStats {
            iterations,
            relative_residual: rel,
        })
    }
}

/// Active mask and edge fractions of the region `{phi < 0}`, with `phi`
/// sampled at nodes; crossings are located by linear interpolation.
pub fn level_set_region(grid: &Grid2D, phi: &[f64]) -> (Vec<bool>, Vec<Fractions>) {
    let nx = grid.nx();
    let active: Vec<bool> = (0..grid.len())
        .map(|k| {
            let (i, j) = grid.ij(k);
            phi[k] < 0.0 && !grid.is_boundary(i, j)
        })
        .collect();
    let mut theta = vec![[1.0; 4]; grid.len()];
    for k in 0..grid.len() {
        if !active[k] {
            continue;
        }
        for (dir, q) in [k + 1, k - 1, k + nx, k - nx].into_iter().enumerate() {
            if !active[q] && phi[q] >= 0.0 {
                theta[k][dir] = (phi[k] / (phi[k] - phi[q])).clamp(MIN_THETA, 1.0);
            }
        }
    }
    (active, theta)
}

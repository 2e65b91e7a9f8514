use std::f64::consts::PI;

use crate::almgren::{ReactionSpec, SegregatedConfig};
use crate::error::{Error, Result};
use crate::grid::{Grid2D, Point, ScalarField};

/// Sector of angle `theta` when the plane is cut into `m` sectors of width
/// `2π/m`, sector `k` centered at `2πk/m`.
pub fn sector_of(theta: f64, m: usize) -> usize {
    let t = theta.rem_euclid(2.0 * PI);
    ((t * m as f64 / (2.0 * PI)).round() as usize) % m
}

/// `r^{m/2} |cos(m θ / 2)|` split into sector-supported components around
/// `center`: sector `k` goes to component `assignment[k]`.
pub fn make_prototype_at(
    m: usize,
    grid: Grid2D,
    assignment: &[usize],
    center: Point,
) -> Result<SegregatedConfig> {
    if m < 2 {
        return Err(Error::InvalidParams(format!("prototype degree m must be >= 2, got {m}")));
    }
    if assignment.len() != m {
        return Err(Error::InvalidParams(format!(
            "assignment covers {} sectors, expected {m}",
            assignment.len()
        )));
    }
    for k in 0..m {
        let next = (k + 1) % m;
        if assignment[k] == assignment[next] {
            return Err(Error::BadAssignment(k, next));
        }
    }
    let h = assignment.iter().max().unwrap() + 1;
    if let Some(c) = (0..h).find(|c| !assignment.contains(c)) {
        return Err(Error::InvalidParams(format!("component {c} has no sector")));
    }
    let half = m as f64 / 2.0;
    let mut values = vec![vec![0.0; grid.len()]; h];
    for k in 0..grid.len() {
        let p = grid.coords_of(k);
        let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
        let r = dx.hypot(dy);
        if r == 0.0 {
            continue;
        }
        let theta = dy.atan2(dx);
        let v = r.powf(half) * (half * theta).cos().abs();
        values[assignment[sector_of(theta, m)]][k] = v;
    }
    let components = values
        .into_iter()
        .map(|v| ScalarField::new(grid, v))
        .collect::<Result<Vec<_>>>()?;
    SegregatedConfig::new(components, ReactionSpec::zero(h), 0.0)
}

/// Prototype centered at the origin.
pub fn make_prototype(m: usize, grid: Grid2D, assignment: &[usize]) -> Result<SegregatedConfig> {
    make_prototype_at(m, grid, assignment, [0.0, 0.0])
}

/// Alternating `0, 1, 0, 1, ...` assignment (valid for even `m`), or
/// `0, 1, ..., m-1` for odd `m`.
pub fn default_assignment(m: usize) -> Vec<usize> {
    if m.is_multiple_of(2) {
        (0..m).map(|k| k % 2).collect()
    } else {
        (0..m).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::almgren::{average, energy, frequency, overlap_ratio};

    fn grid(cells: usize) -> Grid2D {
        Grid2D::square([0.0, 0.0], 1.1, cells).unwrap()
    }

    #[test]
    fn two_sectors_are_half_planes() {
        let g = grid(64);
        let u = make_prototype(2, g, &[0, 1]).unwrap();
        for k in 0..g.len() {
            let x = g.coords_of(k)[0];
            assert!((u.component(0).values()[k] - x.max(0.0)).abs() < 1e-12);
            assert!((u.component(1).values()[k] - (-x).max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn adjacent_sectors_must_differ() {
        let g = grid(32);
        assert!(matches!(
            make_prototype(3, g, &[0, 1, 1]),
            Err(Error::BadAssignment(1, 2))
        ));
        assert!(matches!(
            make_prototype(4, g, &[0, 1, 2, 0]),
            Err(Error::BadAssignment(3, 0))
        ));
        assert!(make_prototype(4, g, &[0, 1, 0, 1]).is_ok());
        assert!(make_prototype(1, g, &[0]).is_err());
    }

    #[test]
    fn supports_are_disjoint() {
        let u = make_prototype(5, grid(64), &default_assignment(5)).unwrap();
        assert_eq!(overlap_ratio(u.components()).0, 0.0);
    }

    #[test]
    fn three_sector_energy_and_average_match_closed_form() {
        // E(1) = α ∫ cos^2(3θ/2) dθ = 3π/2, H(1) = π
        let g = Grid2D::square([0.0, 0.0], 1.05, 1075).unwrap();
        let u = make_prototype(3, g, &[0, 1, 2]).unwrap();
        let e = energy(&u, [0.0, 0.0], 1.0).unwrap();
        assert!((e / (1.5 * PI) - 1.0).abs() < 1e-3, "E = {e}");
        let h = average(&u, [0.0, 0.0], 1.0).unwrap();
        assert!((h / PI - 1.0).abs() < 1e-3, "H = {h}");
        for r in [0.05, 0.2, 0.5] {
            let n = frequency(&u, [0.0, 0.0], r).unwrap();
            assert!((n - 1.5).abs() < 5e-3, "N({r}) = {n}");
        }
    }
}

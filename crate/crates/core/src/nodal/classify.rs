use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::almgren::{extrapolate_n0, frequency_profile, SegregatedConfig};
use crate::error::{Error, Result};
use crate::grid::{distance, Point};

use super::NodalSet;

/// Regular/singular threshold, the midpoint of the gap between 1 and 3/2.
pub const N_STAR: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Regular,
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPointReport {
    pub location: Point,
    pub n0: f64,
    pub classification: Classification,
    pub branch_count: usize,
    /// Directions in `[0, 2π)`, increasing.
    pub branch_angles: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Largest profile radius; shrunk per point to stay `2h` inside the grid
    /// and within half the distance to any other singular candidate.
    pub r_max: f64,
    pub n_radii: usize,
    /// Smallest radius is `4h * scale`.
    pub scale: f64,
    pub n_star: f64,
    /// Circle radius for branch counting in units of `h`.
    pub branch_radius_cells: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            r_max: 0.25,
            n_radii: 16,
            scale: 1.0,
            n_star: N_STAR,
            branch_radius_cells: 10.0,
        }
    }
}

/// Estimates `N(0+)` at each sample by linear extrapolation over
/// `[4h scale, r_max / 3]`, classifies it against `n_star` and counts the
/// polylines crossing the circle of radius `10h` around it.
pub fn classify_points(
    u: &SegregatedConfig,
    nodal: &NodalSet,
    samples: &[Point],
    opts: &ClassifyOptions,
) -> Result<Vec<SingularPointReport>> {
    u.derived();
    samples.par_iter().map(|&x0| classify_one(u, nodal, x0, opts)).collect()
}

fn classify_one(
    u: &SegregatedConfig,
    nodal: &NodalSet,
    x0: Point,
    opts: &ClassifyOptions,
) -> Result<SingularPointReport> {
    let g = u.grid();
    let h = g.h();
    let wall = g.distance_to_boundary(x0);
    if wall < 8.0 * h {
        return Err(Error::BallOutOfDomain {
            center: x0,
            radius: 8.0 * h,
            margin: 0.0,
        });
    }
    let r_min = 4.0 * h * opts.scale;
    let other = nodal
        .singular_candidates
        .iter()
        .map(|&c| distance(c, x0))
        .filter(|&d| d > 4.0 * h)
        .fold(f64::INFINITY, f64::min);
    let r_max = opts.r_max.min(wall - 2.0 * h).min(0.5 * other);
    if r_max < 3.0 * r_min {
        return Err(Error::InvalidParams(format!(
            "no room for a frequency profile at ({}, {}): r_max {r_max} < 3 r_min {}",
            x0[0],
            x0[1],
            3.0 * r_min
        )));
    }
    let profile = frequency_profile(u, x0, r_min, r_max, opts.n_radii)?;
    let (n0, _) = extrapolate_n0(&profile.radii, &profile.frequency, (r_min, r_max / 3.0));
    let angles = branch_angles(nodal, x0, opts.branch_radius_cells * h);
    Ok(SingularPointReport {
        location: x0,
        n0,
        classification: if n0 >= opts.n_star {
            Classification::Singular
        } else {
            Classification::Regular
        },
        branch_count: angles.len(),
        branch_angles: angles,
    })
}

/// Directions from `x0` of the points where the nodal set crosses the
/// circle of radius `radius`, in `[0, 2π)`. Crossings closer than `h/radius`
/// radians (contouring noise) are merged.
pub fn branch_angles(nodal: &NodalSet, x0: Point, radius: f64) -> Vec<f64> {
    let mut angles = Vec::new();
    for (a, b) in nodal.segments() {
        let d = [b[0] - a[0], b[1] - a[1]];
        let f = [a[0] - x0[0], a[1] - x0[1]];
        let qa = d[0] * d[0] + d[1] * d[1];
        if qa == 0.0 {
            continue;
        }
        let qb = 2.0 * (f[0] * d[0] + f[1] * d[1]);
        let qc = f[0] * f[0] + f[1] * f[1] - radius * radius;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
            // half-open so shared vertices count once
            if (0.0..1.0).contains(&t) {
                let p = [f[0] + t * d[0], f[1] + t * d[1]];
                angles.push(p[1].atan2(p[0]).rem_euclid(2.0 * PI));
            }
        }
        if disc == 0.0 {
            angles.pop();
        }
    }
    angles.sort_by(f64::total_cmp);
    let tol = nodal.grid.h() / radius;
    let mut merged: Vec<f64> = Vec::new();
    for a in angles {
        match merged.last() {
            Some(&l) if a - l < tol => {}
            _ => merged.push(a),
        }
    }
    if merged.len() > 1 && merged[0] + 2.0 * PI - merged[merged.len() - 1] < tol {
        merged.pop();
    }
    merged
}

/// Largest deviation of consecutive branch gaps from `2π / k`. A point
/// without branches reports `2π`.
pub fn equal_angle_check(report: &SingularPointReport) -> f64 {
    let a = &report.branch_angles;
    let k = a.len();
    if k == 0 {
        return 2.0 * PI;
    }
    let ideal = 2.0 * PI / k as f64;
    (0..k)
        .map(|i| {
            let gap = if i + 1 < k {
                a[i + 1] - a[i]
            } else {
                a[0] + 2.0 * PI - a[k - 1]
            };
            (gap - ideal).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;
    use crate::nodal::extract_nodal_set;
    use crate::solver::{default_assignment, make_prototype, make_prototype_at};

    fn report(angles: &[f64]) -> SingularPointReport {
        SingularPointReport {
            location: [0.0, 0.0],
            n0: 1.5,
            classification: Classification::Singular,
            branch_count: angles.len(),
            branch_angles: angles.to_vec(),
        }
    }

    #[test]
    fn equal_angles_have_zero_deviation() {
        let r = report(&[0.1, 0.1 + 2.0 * PI / 3.0, 0.1 + 4.0 * PI / 3.0]);
        assert!(equal_angle_check(&r) < 1e-12);
    }

    #[test]
    fn right_angle_junction_deviates_by_a_sixth_of_pi() {
        // gaps π/2, π/2, π against 2π/3
        let r = report(&[0.0, 0.5 * PI, PI]);
        assert!((equal_angle_check(&r) - PI / 3.0).abs() < 1e-12);
        let r = report(&[0.0, 0.5 * PI, 1.5 * PI]);
        assert!((equal_angle_check(&r) - PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn prototype_points_classify_by_the_frequency_gap() {
        let g = Grid2D::square([0.0, 0.0], 0.6, 192).unwrap();
        let u = make_prototype(3, g, &[0, 1, 2]).unwrap();
        let set = extract_nodal_set(&u, 0.0).unwrap();
        assert!(distance(set.singular_candidates[0], [0.0, 0.0]) <= g.h());
        let c = [0.0, 0.0];
        let off = [0.25 * (PI / 3.0).cos(), 0.25 * (PI / 3.0).sin()];
        let opts = ClassifyOptions {
            r_max: 0.3,
            ..Default::default()
        };
        let reps = classify_points(&u, &set, &[c, off], &opts).unwrap();
        assert_eq!(reps[0].classification, Classification::Singular);
        assert!((reps[0].n0 - 1.5).abs() < 0.05, "{}", reps[0].n0);
        assert_eq!(reps[0].branch_count, 3);
        assert!(equal_angle_check(&reps[0]) < 0.02, "{:?}", reps[0].branch_angles);
        assert_eq!(reps[1].classification, Classification::Regular);
        assert!((reps[1].n0 - 1.0).abs() < 0.05, "{}", reps[1].n0);
        assert_eq!(reps[1].branch_count, 2);
    }

    #[test]
    fn four_sector_origin_has_right_angles() {
        let g = Grid2D::square([0.0, 0.0], 0.6, 160).unwrap();
        let center = [0.0013, 0.0007];
        let u = make_prototype_at(4, g, &default_assignment(4), center).unwrap();
        let set = extract_nodal_set(&u, 0.0).unwrap();
        let rep = classify_points(&u, &set, &[center], &ClassifyOptions::default()).unwrap();
        assert_eq!(rep[0].branch_count, 4);
        assert!((rep[0].n0 - 2.0).abs() < 0.05);
        assert!(equal_angle_check(&rep[0]) < 0.02);
    }

    #[test]
    fn samples_near_the_wall_are_rejected() {
        let g = Grid2D::square([0.0, 0.0], 0.5, 64).unwrap();
        let u = make_prototype(2, g, &[0, 1]).unwrap();
        let set = extract_nodal_set(&u, 0.0).unwrap();
        let p = [0.0, 0.5 - 4.0 * g.h()];
        assert!(classify_points(&u, &set, &[p], &ClassifyOptions::default()).is_err());
    }
}

//! First Dirichlet eigenvalues on masked regions and optimal `h`-partitions
//! minimizing the `p`-mean (or the max) of the part eigenvalues, relaxed by
//! the quadratic competition penalty.

mod optimize;
mod scale;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid2D, Point, ScalarField};
use crate::linsolve::{level_set_region, Fractions, ShiftedLaplacian, MIN_THETA};

pub use optimize::{optimize_partition, optimize_partition_from, HistoryEntry, PartitionOptions};
pub use scale::{interface_scales, partition_to_config};

/// Fewest active nodes accepted by [`lambda1`].
pub const MIN_REGION_NODES: usize = 9;
/// Relative change of the Rayleigh quotient that ends inverse iteration.
pub const RAYLEIGH_TOL: f64 = 1e-8;
/// Relative eigen-residual that ends inverse iteration.
pub const RESIDUAL_TOL: f64 = 1e-8;
const LINEAR_TOL: f64 = 1e-12;
const MAX_POWER_STEPS: usize = 500;

/// Active nodes of a region with the edge fractions of its cut boundary.
/// Grid-boundary nodes are never active.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    grid: Grid2D,
    active: Vec<bool>,
    theta: Vec<Fractions>,
}

impl Domain {
    /// Every interior node of the grid.
    pub fn rectangle(grid: Grid2D) -> Self {
        let active = (0..grid.len())
            .map(|k| {
                let (i, j) = grid.ij(k);
                !grid.is_boundary(i, j)
            })
            .collect();
        Self::from_mask(grid, active)
    }

    /// Staircase region: Dirichlet data sits on the first inactive node.
    pub fn from_mask(grid: Grid2D, mask: Vec<bool>) -> Self {
        let active = mask
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                let (i, j) = grid.ij(k);
                a && !grid.is_boundary(i, j)
            })
            .collect();
        Self {
            grid,
            active,
            theta: vec![[1.0; 4]; grid.len()],
        }
    }

    /// `{phi < 0}` with the boundary located on grid edges by linear
    /// interpolation of `phi`.
    pub fn from_level_set(grid: Grid2D, phi: &[f64]) -> Self {
        let (active, theta) = level_set_region(&grid, phi);
        Self { grid, active, theta }
    }

    pub fn disk(grid: Grid2D, center: Point, radius: f64) -> Self {
        let phi: Vec<f64> = (0..grid.len())
            .map(|k| {
                let p = grid.coords_of(k);
                (p[0] - center[0]).hypot(p[1] - center[1]) - radius
            })
            .collect();
        Self::from_level_set(grid, &phi)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn theta(&self) -> &[Fractions] {
        &self.theta
    }

    pub fn node_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Part of the domain where `phi < 0`, cut on both boundaries.
    pub fn restrict(&self, phi: &[f64]) -> Self {
        let (act, th) = level_set_region(&self.grid, phi);
        let active = act.iter().zip(&self.active).map(|(&a, &b)| a && b).collect();
        let theta = th
            .iter()
            .zip(&self.theta)
            .map(|(a, b)| std::array::from_fn(|d| a[d].min(b[d]).max(MIN_THETA)))
            .collect();
        Self {
            grid: self.grid,
            active,
            theta,
        }
    }

    pub(crate) fn operator(&self, sigma: &[f64]) -> Result<ShiftedLaplacian> {
        ShiftedLaplacian::new(self.grid, &self.active, sigma, Some(&self.theta))
    }
}

pub(crate) fn l2_norm(grid: &Grid2D, v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * grid.h() * grid.h()).sqrt()
}

/// `<v, A v> / <v, v>` over the active nodes of `op`.
pub(crate) fn rayleigh(op: &ShiftedLaplacian, v: &[f64], work: &mut [f64]) -> f64 {
    op.apply(v, work);
    let num: f64 = v.iter().zip(work.iter()).map(|(a, b)| a * b).sum();
    let den: f64 = v.iter().zip(op.active()).filter(|(_, &a)| a).map(|(a, _)| a * a).sum();
    num / den
}

/// First Dirichlet eigenvalue of the 5-point Laplacian on the region and
/// its positive eigenfunction with unit discrete `L^2` norm, by inverse
/// iteration. Stops once the Rayleigh quotient changes by at most
/// [`RAYLEIGH_TOL`] and the residual `|A φ - λ φ|_∞` is at most
/// [`RESIDUAL_TOL`]` λ |φ|_∞`.
pub fn lambda1(domain: &Domain) -> Result<(f64, ScalarField)> {
    let n = domain.node_count();
    if n < MIN_REGION_NODES {
        return Err(Error::EmptyRegion(n));
    }
    let g = domain.grid;
    let op = domain.operator(&vec![0.0; g.len()])?;
    let mut x: Vec<f64> = domain.active.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    let mut work = vec![0.0; g.len()];
    let mut lambda = rayleigh(&op, &x, &mut work);
    for _ in 0..MAX_POWER_STEPS {
        let mut y = x.iter().map(|v| v / lambda).collect::<Vec<_>>();
        op.solve(&x, &mut y, LINEAR_TOL, 500)?;
        let norm = l2_norm(&g, &y);
        y.iter_mut().for_each(|v| *v /= norm);
        x = y;
        let next = rayleigh(&op, &x, &mut work);
        let top = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let residual = x
            .iter()
            .zip(&work)
            .zip(&domain.active)
            .filter(|(_, &a)| a)
            .fold(0.0_f64, |m, ((v, av), _)| m.max((av - next * v).abs()));
        let done = (next - lambda).abs() <= RAYLEIGH_TOL * next && residual <= RESIDUAL_TOL * next * top;
        lambda = next;
        if done {
            let sign = if x.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            let v = x.iter().map(|v| (sign * v).max(0.0)).collect();
            return Ok((lambda, ScalarField::new(g, v)?));
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_POWER_STEPS,
        residual: lambda,
    })
}

/// `(1/h Σ λ_i^p)^{1/p}`, or `max λ_i` for infinite `p`.
pub fn p_mean(lambdas: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    let m = lambdas.len() as f64;
    (lambdas.iter().map(|l| l.powf(p)).sum::<f64>() / m).powf(1.0 / p)
}

pub(crate) fn validate_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("p must lie in [1, inf], got {p}")))
    }
}

mod p_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &f64, s: S) -> Result<S::Ok, S::Error> {
        if p.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*p)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum P {
            Num(f64),
            Text(String),
        }
        match P::deserialize(d)? {
            P::Num(p) => Ok(p),
            P::Text(t) if t == "inf" || t == "infinity" => Ok(f64::INFINITY),
            P::Text(t) => Err(serde::de::Error::custom(format!("bad p {t:?}"))),
        }
    }
}

pub use p_serde::{deserialize as deserialize_p, serialize as serialize_p};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionObjective {
    #[serde(with = "p_serde")]
    pub p: f64,
    pub value: f64,
}

/// Result of [`optimize_partition`].
#[derive(Debug, Clone)]
pub struct Partition {
    pub grid: Grid2D,
    /// `0` outside the domain or where every component vanishes, `i + 1` on
    /// part `i`.
    pub labels: Vec<usize>,
    /// `λ_1` of the hard parts.
    pub eigenvalues: Vec<f64>,
    /// Unit-norm eigenfunctions of the hard parts, zero outside them.
    pub eigenfunctions: Vec<ScalarField>,
    /// Relaxed components at the last penalty, unit norm.
    pub relaxed: Vec<ScalarField>,
    /// Dirichlet Rayleigh quotients of the relaxed components.
    pub relaxed_eigenvalues: Vec<f64>,
    pub p: f64,
    pub objective: f64,
    pub seed: u64,
    /// Starts that ended with a collapsed component.
    pub failed_seeds: Vec<u64>,
    pub history: Vec<HistoryEntry>,
}

impl Partition {
    pub fn h(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn part_mask(&self, i: usize) -> Vec<bool> {
        self.labels.iter().map(|&l| l == i + 1).collect()
    }

    /// Node count of each part.
    pub fn part_sizes(&self) -> Vec<usize> {
        (0..self.h())
            .map(|i| self.labels.iter().filter(|&&l| l == i + 1).count())
            .collect()
    }

    /// Writes `labels.csv` (`i,j,label`), `parts.json` with
    /// `{lambda1, mass, a}` per part and `history.csv`.
    pub fn write(&self, dir: &Path, scales: &[f64]) -> Result<Vec<PathBuf>> {
        use std::fmt::Write as _;
        fs::create_dir_all(dir)?;
        let g = self.grid;
        let mut csv = String::from("i,j,label\n");
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let _ = writeln!(csv, "{i},{j},{}", self.labels[g.idx(i, j)]);
            }
        }
        let labels = dir.join("labels.csv");
        fs::write(&labels, csv)?;
        let h2 = g.h() * g.h();
        let parts: Vec<serde_json::Value> = (0..self.h())
            .map(|i| {
                serde_json::json!({
                    "lambda1": self.eigenvalues[i],
                    "mass": self.part_sizes()[i] as f64 * h2,
                    "a": scales.get(i),
                })
            })
            .collect();
        let summary = serde_json::json!({
            "p": if self.p.is_infinite() { serde_json::json!("inf") } else { serde_json::json!(self.p) },
            "objective": self.objective,
            "seed": self.seed,
            "failed_seeds": self.failed_seeds,
            "parts": parts,
        });
        let parts_path = dir.join("parts.json");
        fs::write(&parts_path, serde_json::to_string_pretty(&summary)? + "\n")?;
        let mut hist = String::from("beta,sweep,energy,objective\n");
        for e in &self.history {
            let _ = writeln!(hist, "{},{},{},{}", e.beta, e.sweep, e.energy, e.objective);
        }
        let hist_path = dir.join("history.csv");
        fs::write(&hist_path, hist)?;
        Ok(vec![labels, parts_path, hist_path])
    }
}

/// Objective of the hard eigenvalues at any `p`.
pub fn objective(partition: &Partition, p: f64) -> PartitionObjective {
    PartitionObjective {
        p,
        value: p_mean(&partition.eigenvalues, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // first zero of J_0
    const J01: f64 = 2.404_825_557_695_773;

    #[test]
    fn unit_square_eigenvalue() {
        let g = Grid2D::unit_square(128).unwrap();
        let (l, phi) = lambda1(&Domain::rectangle(g)).unwrap();
        let exact = 2.0 * PI * PI;
        assert!((l - exact).abs() < 5e-3 * exact, "{l}");
        assert!((l2_norm(&g, phi.values()) - 1.0).abs() < 1e-8);
        assert!(phi.min() >= 0.0);
        // discrete oracle: (4/h^2) (sin^2(πh/2) + sin^2(πh/2))
        let h = g.h();
        let discrete = 8.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        assert!((l - discrete).abs() < 1e-6 * discrete);
    }

    #[test]
    fn half_square_eigenvalue() {
        let g = Grid2D::unit_square(128).unwrap();
        let mask = (0..g.len()).map(|k| g.coords_of(k)[0] < 0.5 - 1e-12).collect();
        let (l, _) = lambda1(&Domain::from_mask(g, mask)).unwrap();
        let exact = 5.0 * PI * PI;
        assert!((l - exact).abs() < 5e-3 * exact, "{l}");
    }

    #[test]
    fn disk_eigenvalue() {
        let g = Grid2D::square([0.0, 0.0], 1.05, 128).unwrap();
        let (l, phi) = lambda1(&Domain::disk(g, [0.0, 0.0], 1.0)).unwrap();
        assert!((l - J01 * J01).abs() < 1e-2 * J01 * J01, "{l}");
        // radial symmetry of the eigenfunction
        let a = phi.sample([0.5, 0.0]);
        let b = phi.sample([0.0, -0.5]);
        assert!((a - b).abs() < 1e-3 * a);
    }

    #[test]
    fn tiny_regions_are_rejected() {
        let g = Grid2D::unit_square(32).unwrap();
        let mask = (0..g.len()).map(|k| k == g.idx(5, 5)).collect();
        assert!(matches!(lambda1(&Domain::from_mask(g, mask)), Err(Error::EmptyRegion(1))));
    }

    #[test]
    fn p_means() {
        assert_eq!(p_mean(&[1.0, 3.0], 1.0), 2.0);
        assert_eq!(p_mean(&[1.0, 3.0], f64::INFINITY), 3.0);
        for p in [1.0, 2.0, 7.5, f64::INFINITY] {
            assert!((p_mean(&[4.0, 4.0, 4.0], p) - 4.0).abs() < 1e-12);
        }
        let o = PartitionObjective {
            p: f64::INFINITY,
            value: 1.0,
        };
        let s = serde_json::to_string(&o).unwrap();
        assert_eq!(s, r#"{"p":"inf","value":1.0}"#);
        assert_eq!(serde_json::from_str::<PartitionObjective>(&s).unwrap(), o);
    }
}

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{diff_along, Grid2D, ScalarField};

use super::reaction::ReactionSpec;

/// Round-off allowance for nonnegativity.
pub const EPS_NEG: f64 = 1e-10;

/// Nonnegative components `U = (u_1, ..., u_h)` with (nearly) disjoint
/// supports and their reaction terms.
#[derive(Debug, Clone)]
pub struct SegregatedConfig {
    grid: Grid2D,
    components: Vec<ScalarField>,
    reaction: ReactionSpec,
    eps_seg: f64,
    derived: OnceLock<Derived>,
}

/// Node fields shared by every quadrature on a configuration.
#[derive(Debug, Clone)]
pub(crate) struct Derived {
    /// `|∇U|^2 - <F(U), U>`.
    pub energy_density: Vec<f64>,
    /// `|∇U|^2`.
    pub gradient_density: Vec<f64>,
    /// `|U|^2`.
    pub sum_squares: Vec<f64>,
    /// `<F(U), U>`.
    pub reaction_product: Vec<f64>,
    /// `sum_i f_i(u_i) ∇u_i`.
    pub reaction_flux: Vec<[f64; 2]>,
}

/// Largest pairwise overlap `∫ u_i u_j / ∫ |U|^2` and the pair attaining it.
pub fn overlap_ratio(components: &[ScalarField]) -> (f64, usize, usize) {
    let total: f64 = components
        .iter()
        .map(|c| c.values().iter().map(|v| v * v).sum::<f64>())
        .sum();
    let mut worst = (0.0, 0, 0);
    if total <= 0.0 {
        return worst;
    }
    for i in 0..components.len() {
        for j in i + 1..components.len() {
            let s: f64 = components[i]
                .values()
                .iter()
                .zip(components[j].values())
                .map(|(a, b)| a.max(0.0) * b.max(0.0))
                .sum();
            let ratio = s / total;
            if ratio > worst.0 {
                worst = (ratio, i, j);
            }
        }
    }
    worst
}

impl SegregatedConfig {
    pub fn new(components: Vec<ScalarField>, reaction: ReactionSpec, eps_seg: f64) -> Result<Self> {
        let grid = Self::check_shape(&components, &reaction)?;
        if !(eps_seg.is_finite() && eps_seg >= 0.0) {
            return Err(Error::InvalidConfig(format!("eps_seg must be >= 0, got {eps_seg}")));
        }
        let (ratio, i, j) = overlap_ratio(&components);
        if ratio > eps_seg {
            return Err(Error::NotSegregated {
                i,
                j,
                ratio,
                eps_seg,
            });
        }
        Ok(Self {
            grid,
            components,
            reaction,
            eps_seg,
            derived: OnceLock::new(),
        })
    }

    /// Builds a configuration whose recorded `eps_seg` is the measured overlap.
    pub fn with_measured_overlap(components: Vec<ScalarField>, reaction: ReactionSpec) -> Result<Self> {
        let eps = overlap_ratio(&components).0;
        Self::new(components, reaction, eps)
    }

    fn check_shape(components: &[ScalarField], reaction: &ReactionSpec) -> Result<Grid2D> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidConfig("no components".into()))?;
        let grid = *first.grid();
        if reaction.len() != components.len() {
            return Err(Error::InvalidConfig(format!(
                "{} components but {} reaction terms",
                components.len(),
                reaction.len()
            )));
        }
        let mut nonzero = false;
        for (c, f) in components.iter().enumerate() {
            if *f.grid() != grid {
                return Err(Error::InvalidConfig(format!("component {c} lives on another grid")));
            }
            if let Some(k) = f.values().iter().position(|&v| v < -EPS_NEG) {
                return Err(Error::InvalidConfig(format!(
                    "component {c} is negative ({}) at node {k}",
                    f.values()[k]
                )));
            }
            nonzero |= f.values().iter().any(|&v| v > 0.0);
        }
        if !nonzero {
            return Err(Error::InvalidConfig("configuration vanishes identically".into()));
        }
        Ok(grid)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn h_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    pub fn reaction(&self) -> &ReactionSpec {
        &self.reaction
    }

    pub fn eps_seg(&self) -> f64 {
        self.eps_seg
    }

    /// `max_i sup u_i`.
    pub fn sup(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| f64::max(m, c.max()))
    }

    /// `d = max_i sup |f_i(s)/s|` over the value range of the configuration.
    pub fn d_bound(&self) -> f64 {
        self.reaction.d_bound(self.sup())
    }

    /// `rho U`, with reaction rescaled so that `rho U` solves the same system.
    pub fn scaled(&self, rho: f64) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| c.scaled(rho))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components, self.reaction.rescale(1.0, 1.0 / rho), self.eps_seg)
    }

    /// Components reordered so that new component `k` is old `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let components = order.iter().map(|&i| self.components[i].clone()).collect();
        Self::new(components, self.reaction.permuted(order), self.eps_seg)
    }

    pub fn with_reaction(&self, reaction: ReactionSpec) -> Result<Self> {
        Self::new(self.components.clone(), reaction, self.eps_seg)
    }

    /// Index of the largest component at every node, `None` where all vanish.
    pub fn dominant_labels(&self) -> Vec<Option<usize>> {
        (0..self.grid.len())
            .map(|k| {
                let mut best: Option<(usize, f64)> = None;
                for (i, c) in self.components.iter().enumerate() {
                    let v = c.values()[k];
                    if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                        best = Some((i, v));
                    }
                }
                best.map(|(i, _)| i)
            })
            .collect()
    }

    /// `|U|^2` as a field.
    pub fn sum_squares(&self) -> ScalarField {
        ScalarField::new(self.grid, self.derived().sum_squares.clone())
            .expect("finite by construction")
    }

    /// `|∇U|^2` with reflected differences across the interface.
    pub fn gradient_density(&self) -> ScalarField {
        ScalarField::new(self.grid, self.derived().gradient_density.clone())
            .expect("finite by construction")
    }

    /// Nodes within `radius` of the interface: nodes where every component
    /// vanishes or where the dominant label differs from a neighbour's.
    pub fn interface_band(&self, radius: f64) -> Vec<bool> {
        let g = &self.grid;
        let labels = self.dominant_labels();
        let (nx, ny) = (g.nx(), g.ny());
        let mut seed = vec![false; g.len()];
        for j in 0..ny {
            for i in 0..nx {
                let k = g.idx(i, j);
                let l = labels[k];
                seed[k] = l.is_none()
                    || (i + 1 < nx && labels[k + 1] != l)
                    || (j + 1 < ny && labels[k + nx] != l)
                    || (i > 0 && labels[k - 1] != l)
                    || (j > 0 && labels[k - nx] != l);
            }
        }
        let reach = (radius / g.h()).floor() as isize;
        let mut band = vec![false; g.len()];
        for k in (0..g.len()).filter(|&k| seed[k]) {
            let (i, j) = g.ij(k);
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    if di * di + dj * dj > reach * reach {
                        continue;
                    }
                    let (a, b) = (i as isize + di, j as isize + dj);
                    if a >= 0 && b >= 0 && (a as usize) < nx && (b as usize) < ny {
                        band[g.idx(a as usize, b as usize)] = true;
                    }
                }
            }
        }
        band
    }

    /// Node densities, computed once.
    ///
    /// Each interior node takes the central-difference gradient of the
    /// reflected extension `u_c - max_{j != c} u_j` of its largest component
    /// `c`; the extension is smooth across regular interface points and
    /// ignores thin overlap tails. Nodes where every component vanishes use
    /// the component largest on their neighbours.
    pub(crate) fn derived(&self) -> &Derived {
        self.derived.get_or_init(|| self.compute_derived())
    }

    fn compute_derived(&self) -> Derived {
        let g = self.grid;
        let (nx, ny, h) = (g.nx(), g.ny(), g.h());
        let n = g.len();
        let vals: Vec<&[f64]> = self.components.iter().map(|c| c.values()).collect();
        let hc = vals.len();
        let reflected = |i: usize, q: usize| -> f64 {
            let mut m = 0.0_f64;
            for (j, c) in vals.iter().enumerate() {
                if j != i {
                    m = m.max(c[q]);
                }
            }
            vals[i][q].max(0.0) - m
        };
        let grad_r = |i: usize, k: usize| -> [f64; 2] {
            [
                (reflected(i, k + 1) - reflected(i, k - 1)) / (2.0 * h),
                (reflected(i, k + nx) - reflected(i, k - nx)) / (2.0 * h),
            ]
        };

        let mut gradient_density = vec![0.0; n];
        let mut sum_squares = vec![0.0; n];
        let mut reaction_product = vec![0.0; n];
        let mut reaction_flux = vec![[0.0; 2]; n];
        for k in 0..n {
            let (i, j) = g.ij(k);
            let mut u2 = 0.0;
            let mut fu = 0.0;
            for c in 0..hc {
                let u = vals[c][k].max(0.0);
                u2 += u * u;
                fu += self.reaction.get(c).value(u) * u;
            }
            sum_squares[k] = u2;
            reaction_product[k] = fu;

            if g.is_boundary(i, j) {
                let mut e = 0.0;
                let mut flux = [0.0; 2];
                for c in 0..hc {
                    let gx = diff_along(vals[c], k, i, nx, 1, h);
                    let gy = diff_along(vals[c], k, j, ny, nx, h);
                    e += gx * gx + gy * gy;
                    let f = self.reaction.get(c).value(vals[c][k].max(0.0));
                    flux[0] += f * gx;
                    flux[1] += f * gy;
                }
                gradient_density[k] = e;
                reaction_flux[k] = flux;
                continue;
            }

            let mut dominant: Option<(usize, f64)> = None;
            for (c, v) in vals.iter().enumerate() {
                if v[k] > 0.0 && dominant.is_none_or(|(_, b)| v[k] > b) {
                    dominant = Some((c, v[k]));
                }
            }
            if dominant.is_none() {
                for (c, v) in vals.iter().enumerate() {
                    let m = v[k + 1].max(v[k - 1]).max(v[k + nx]).max(v[k - nx]);
                    if m > 0.0 && dominant.is_none_or(|(_, b)| m > b) {
                        dominant = Some((c, m));
                    }
                }
            }
            let (mut e, mut flux) = (0.0, [0.0; 2]);
            if let Some((c, _)) = dominant {
                let gr = grad_r(c, k);
                e = gr[0] * gr[0] + gr[1] * gr[1];
                let f = self.reaction.get(c).value(vals[c][k].max(0.0));
                flux = [f * gr[0], f * gr[1]];
            }
            gradient_density[k] = e;
            reaction_flux[k] = flux;
        }
        let energy_density = gradient_density
            .iter()
            .zip(&reaction_product)
            .map(|(e, fu)| e - fu)
            .collect();
        Derived {
            energy_density,
            gradient_density,
            sum_squares,
            reaction_product,
            reaction_flux,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halves(g: Grid2D) -> Vec<ScalarField> {
        vec![
            ScalarField::from_fn(g, |x, _| x.max(0.0)).unwrap(),
            ScalarField::from_fn(g, |x, _| (-x).max(0.0)).unwrap(),
        ]
    }

    fn grid() -> Grid2D {
        Grid2D::square([0.0, 0.0], 1.0, 32).unwrap()
    }

    #[test]
    fn accepts_disjoint_halves() {
        let c = SegregatedConfig::new(halves(grid()), ReactionSpec::zero(2), 0.0).unwrap();
        assert_eq!(c.h_components(), 2);
        assert_eq!(c.sup(), 1.0);
    }

    #[test]
    fn rejects_negative_zero_and_overlapping_inputs() {
        let g = grid();
        let neg = vec![ScalarField::from_fn(g, |x, _| x).unwrap()];
        assert!(SegregatedConfig::new(neg, ReactionSpec::zero(1), 0.0).is_err());
        let zero = vec![ScalarField::zeros(g)];
        assert!(SegregatedConfig::new(zero, ReactionSpec::zero(1), 0.0).is_err());
        let both = vec![
            ScalarField::from_fn(g, |_, _| 1.0).unwrap(),
            ScalarField::from_fn(g, |x, _| x.max(0.0)).unwrap(),
        ];
        assert!(matches!(
            SegregatedConfig::new(both.clone(), ReactionSpec::zero(2), 1e-3),
            Err(Error::NotSegregated { i: 0, j: 1, .. })
        ));
        let measured = SegregatedConfig::with_measured_overlap(both, ReactionSpec::zero(2)).unwrap();
        assert!(measured.eps_seg() > 0.1);
    }

    #[test]
    fn reflected_density_is_exact_across_a_planar_interface() {
        let c = SegregatedConfig::new(halves(grid()), ReactionSpec::zero(2), 0.0).unwrap();
        let d = c.gradient_density();
        for (k, v) in d.values().iter().enumerate() {
            let (i, j) = c.grid().ij(k);
            if !c.grid().is_boundary(i, j) {
                assert!((v - 1.0).abs() < 1e-12, "node {k}: {v}");
            }
        }
    }

    #[test]
    fn interface_band_surrounds_the_interface() {
        let c = SegregatedConfig::new(halves(grid()), ReactionSpec::zero(2), 0.0).unwrap();
        let band = c.interface_band(3.0 * c.grid().h());
        let g = c.grid();
        for (k, &b) in band.iter().enumerate() {
            let x = g.coords_of(k)[0];
            // seeds are the zero line and its label-changing neighbours
            assert_eq!(b, x.abs() <= 4.0 * g.h() + 1e-12, "x = {x}");
        }
    }

    #[test]
    fn permutation_relabels_components() {
        let c = SegregatedConfig::new(halves(grid()), ReactionSpec::zero(2), 0.0).unwrap();
        let p = c.permuted(&[1, 0]).unwrap();
        assert_eq!(p.component(0), c.component(1));
        assert_eq!(p.sum_squares(), c.sum_squares());
    }
}

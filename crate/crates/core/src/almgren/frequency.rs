use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ball_integral_with, bicubic, circle_integral_with, Point};

use super::config::SegregatedConfig;

/// Space dimension; exponents below are written for general `DIM`.
pub const DIM: i32 = 2;

/// Underflow guard on `H`.
pub const TAU_H: f64 = 1e-30;

/// `E(x0, U, r) = r^{-(N-2)} ∫_{B_r} (|∇U|^2 - <F(U), U>)`.
pub fn energy(u: &SegregatedConfig, x0: Point, r: f64) -> Result<f64> {
    let d = &u.derived().energy_density;
    let integral = ball_integral_with(u.grid(), x0, r, |k| d[k])?;
    Ok(integral * r.powi(2 - DIM))
}

/// Dirichlet energy `∫_{B_r} |∇U|^2`, ignoring the reaction.
pub fn dirichlet_energy(u: &SegregatedConfig, x0: Point, r: f64) -> Result<f64> {
    let d = &u.derived().gradient_density;
    ball_integral_with(u.grid(), x0, r, |k| d[k])
}

/// `H(x0, U, r) = r^{-(N-1)} ∫_{∂B_r} |U|^2 dσ`.
pub fn average(u: &SegregatedConfig, x0: Point, r: f64) -> Result<f64> {
    let s = &u.derived().sum_squares;
    let g = u.grid();
    let integral = circle_integral_with(g, x0, r, 0, |p| bicubic(g, s, p))?;
    Ok(integral * r.powi(1 - DIM))
}

/// `N = E / H`.
pub fn frequency(u: &SegregatedConfig, x0: Point, r: f64) -> Result<f64> {
    let h = average(u, x0, r)?;
    if !(h > TAU_H) {
        return Err(Error::DegenerateAverage { radius: r, value: h });
    }
    Ok(energy(u, x0, r)? / h)
}

/// Remainder of the energy derivative identity:
/// `R = 2 r^{-(N-1)} ∫_{B_r} Σ f_i(u_i) <∇u_i, x - x0>
///    + (N-2) r^{-(N-1)} ∫_{B_r} <F(U), U> - r^{-(N-2)} ∫_{∂B_r} <F(U), U> dσ`.
pub fn pohozaev_remainder(u: &SegregatedConfig, x0: Point, r: f64) -> Result<f64> {
    let g = u.grid();
    if u.reaction().is_zero() {
        crate::grid::check_ball(g, x0, r, 2.0 * g.h())?;
        return Ok(0.0);
    }
    let d = u.derived();
    let flux = &d.reaction_flux;
    let fu = &d.reaction_product;
    let radial = ball_integral_with(g, x0, r, |k| {
        let p = g.coords_of(k);
        flux[k][0] * (p[0] - x0[0]) + flux[k][1] * (p[1] - x0[1])
    })?;
    let bulk = if DIM == 2 {
        0.0
    } else {
        ball_integral_with(g, x0, r, |k| fu[k])? * f64::from(DIM - 2)
    };
    let boundary = circle_integral_with(g, x0, r, 0, |p| bicubic(g, fu, p))?;
    Ok((2.0 * radial + bulk) * r.powi(1 - DIM) - boundary * r.powi(2 - DIM))
}

/// `E`, `H`, `N`, `R` at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantities {
    pub energy: f64,
    pub average: f64,
    pub frequency: f64,
    pub remainder: f64,
}

pub fn quantities(u: &SegregatedConfig, x0: Point, r: f64) -> Result<Quantities> {
    let average = average(u, x0, r)?;
    if !(average > TAU_H) {
        return Err(Error::DegenerateAverage {
            radius: r,
            value: average,
        });
    }
    let energy = energy(u, x0, r)?;
    Ok(Quantities {
        energy,
        average,
        frequency: energy / average,
        remainder: pohozaev_remainder(u, x0, r)?,
    })
}

/// `E`, `H`, `N`, `R` sampled at increasing radii around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyProfile {
    pub center: Point,
    pub radii: Vec<f64>,
    pub energy: Vec<f64>,
    pub average: Vec<f64>,
    pub frequency: Vec<f64>,
    pub remainder: Vec<f64>,
}

/// `n` geometrically spaced radii from `r_min` to `r_max`.
pub fn geometric_radii(r_min: f64, r_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![r_min];
    }
    let q = (r_max / r_min).ln() / (n - 1) as f64;
    (0..n)
        .map(|k| {
            if k + 1 == n {
                r_max
            } else {
                r_min * (q * k as f64).exp()
            }
        })
        .collect()
}

/// Profile at `n_radii` geometric radii in `[r_min, r_max]`; requires
/// `r_min >= 4h`.
pub fn frequency_profile(
    u: &SegregatedConfig,
    x0: Point,
    r_min: f64,
    r_max: f64,
    n_radii: usize,
) -> Result<FrequencyProfile> {
    let h = u.grid().h();
    if !(r_min >= 4.0 * h * (1.0 - 1e-12) && r_max > r_min && n_radii >= 2) {
        return Err(Error::InvalidParams(format!(
            "profile radii need 4h <= r_min < r_max and n >= 2, got [{r_min}, {r_max}] x {n_radii} (h = {h})"
        )));
    }
    crate::grid::check_ball(u.grid(), x0, r_max, 2.0 * h)?;
    profile_at(u, x0, &geometric_radii(r_min, r_max, n_radii))
}

/// Profile at explicit increasing radii.
pub fn profile_at(u: &SegregatedConfig, x0: Point, radii: &[f64]) -> Result<FrequencyProfile> {
    // warm the shared densities before fanning out
    u.derived();
    let q: Vec<Quantities> = radii
        .par_iter()
        .map(|&r| quantities(u, x0, r))
        .collect::<Result<_>>()?;
    Ok(FrequencyProfile {
        center: x0,
        radii: radii.to_vec(),
        energy: q.iter().map(|q| q.energy).collect(),
        average: q.iter().map(|q| q.average).collect(),
        frequency: q.iter().map(|q| q.frequency).collect(),
        remainder: q.iter().map(|q| q.remainder).collect(),
    })
}

impl FrequencyProfile {
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequency.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with header `r,E,H,N,R`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,E,H,N,R\n");
        for k in 0..self.len() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                self.radii[k], self.energy[k], self.average[k], self.frequency[k], self.remainder[k]
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::almgren::{Reaction, ReactionSpec};
    use crate::grid::{Grid2D, ScalarField};
    use std::f64::consts::PI;

    fn halves(cells: usize) -> SegregatedConfig {
        let g = Grid2D::square([0.0, 0.0], 1.5, cells).unwrap();
        SegregatedConfig::new(
            vec![
                ScalarField::from_fn(g, |x, _| x.max(0.0)).unwrap(),
                ScalarField::from_fn(g, |x, _| (-x).max(0.0)).unwrap(),
            ],
            ReactionSpec::zero(2),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn planar_pair_has_exact_energy_average_and_frequency() {
        let u = halves(192);
        for r in [0.3, 0.77, 1.0] {
            let e = energy(&u, [0.0, 0.0], r).unwrap();
            assert!((e / (PI * r * r) - 1.0).abs() < 1e-10, "E({r}) = {e}");
            let h = average(&u, [0.0, 0.0], r).unwrap();
            assert!((h / (PI * r * r) - 1.0).abs() < 1e-10, "H({r}) = {h}");
            assert!((frequency(&u, [0.0, 0.0], r).unwrap() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn frequency_is_scale_invariant() {
        let u = halves(96);
        let v = u.scaled(3.7).unwrap();
        let x0 = [0.013, 0.2];
        let a = frequency(&u, x0, 0.5).unwrap();
        let b = frequency(&v, x0, 0.5).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs());
        let ha = average(&u, x0, 0.5).unwrap();
        let hb = average(&v, x0, 0.5).unwrap();
        assert!((hb / ha - 3.7 * 3.7).abs() < 1e-12);
    }

    #[test]
    fn remainder_vanishes_without_reaction() {
        let u = halves(64);
        assert_eq!(pohozaev_remainder(&u, [0.0, 0.0], 0.5).unwrap(), 0.0);
    }

    #[test]
    fn remainder_matches_closed_form_for_linear_reaction() {
        // u = x^+ with f(s) = s: R = 2 r^{-1} ∫ x^+ * x - ∫_{∂B} (x^+)^2 dσ
        // = 2 r^{-1} (π r^4 / 8) - π r^3 / 2 = -π r^3 / 4
        let u = halves(256)
            .with_reaction(ReactionSpec::new(vec![Reaction::Linear { lambda: 1.0 }, Reaction::Zero]).unwrap())
            .unwrap();
        let r = 0.8;
        let rem = pohozaev_remainder(&u, [0.0, 0.0], r).unwrap();
        let exact = -PI * r * r * r / 4.0;
        assert!((rem - exact).abs() < 1e-3 * exact.abs(), "{rem} vs {exact}");
    }

    #[test]
    fn positive_component_has_vanishing_frequency_at_small_radii() {
        let g = Grid2D::square([0.0, 0.0], 1.0, 256).unwrap();
        let u = SegregatedConfig::new(
            vec![ScalarField::from_fn(g, |x, y| 2.0 + x + 0.5 * y).unwrap()],
            ReactionSpec::zero(1),
            0.0,
        )
        .unwrap();
        let p = frequency_profile(&u, [0.0, 0.0], 4.0 * g.h(), 0.5, 8).unwrap();
        assert!(p.frequency[0] < 1e-3, "{:?}", p.frequency);
        assert!(p.frequency.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn profile_rejects_radii_below_four_cells() {
        let u = halves(64);
        let h = u.grid().h();
        assert!(frequency_profile(&u, [0.0, 0.0], 3.0 * h, 0.5, 8).is_err());
        let p = frequency_profile(&u, [0.0, 0.0], 4.0 * h, 0.5, 8).unwrap();
        assert_eq!(p.len(), 8);
        assert_eq!(p.radii[7], 0.5);
        assert!(p.to_csv().starts_with("r,E,H,N,R\n"));
    }

    #[test]
    fn degenerate_average_is_reported() {
        let g = Grid2D::square([0.0, 0.0], 1.0, 64).unwrap();
        let u = SegregatedConfig::new(
            vec![ScalarField::from_fn(g, |x, _| (x - 0.8).max(0.0)).unwrap()],
            ReactionSpec::zero(1),
            0.0,
        )
        .unwrap();
        assert!(matches!(
            frequency(&u, [-0.5, 0.0], 0.2),
            Err(Error::DegenerateAverage { .. })
        ));
    }
}

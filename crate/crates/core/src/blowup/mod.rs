//! Rescaled normalized frames `U(x0 + t·) / ρ`, the scaling identities of
//! `E`, `H`, `N` under them, homogeneity of frames and the arc-eigenvalue
//! classification of traces on the unit circle.

mod trace;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::almgren::{average, energy, frequency, geometric_radii, SegregatedConfig, DIM, TAU_H};
use crate::error::{Error, Result};
use crate::grid::io::{write_field, FieldFormat};
use crate::grid::{bicubic, check_ball, Grid2D, Point, ScalarField};

pub use trace::{
    classify_arcs, classify_trace, degree_from_eigenvalue, spherical_trace, Arc, SphericalClassification,
    SphericalTrace, TraceCase,
};

/// Half-width of the reference window `[-W, W]^2`.
pub const WINDOW: f64 = 2.0;
/// Fewest cells across the reference window.
pub const MIN_FRAME_CELLS: usize = 128;
/// Radius range of the `log H` slope fit for `α`.
pub const ALPHA_FIT: (f64, f64) = (0.1, 1.0);
/// Radius range of [`homogeneity_residual`].
pub const HOMOGENEITY_RADII: (f64, f64) = (0.2, 1.5);

#[derive(Debug, Clone)]
pub struct BlowupFrame {
    pub x0: Point,
    pub t: f64,
    /// `√H(x0, U, t)`.
    pub rho: f64,
    /// `U(x0 + t y) / ρ` on the reference window, with the rescaled reaction.
    pub config: SegregatedConfig,
    /// Half the slope of `log H(0, frame, r)` against `log r`.
    pub alpha: f64,
}

/// Relative residuals `|a - b| / max(|a|, |b|)` of the scaling identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingResiduals {
    pub energy: f64,
    pub average: f64,
    pub frequency: f64,
}

/// Frame of `u` at `x0` and scale `t`. The window is resampled with the
/// source spacing when `4t/h` is an integer of at least
/// [`MIN_FRAME_CELLS`], so that frame nodes coincide with source nodes
/// when `x0` is a node and `2t/h` an integer; otherwise it is refined.
/// Window points outside the source grid take clamped bicubic values.
pub fn make_frame(u: &SegregatedConfig, x0: Point, t: f64) -> Result<BlowupFrame> {
    let g = u.grid();
    let h = g.h();
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!("frame scale must be positive, got {t}")));
    }
    check_ball(g, x0, WINDOW * t, 0.0)?;
    let rho2 = average(u, x0, t)?;
    if !(rho2 > TAU_H) {
        return Err(Error::DegenerateAverage { radius: t, value: rho2 });
    }
    let rho = rho2.sqrt();

    let ratio = 2.0 * WINDOW * t / h;
    let cells = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    let cells = cells.max(MIN_FRAME_CELLS);
    let fg = Grid2D::square([0.0, 0.0], WINDOW, cells)?;
    let components = u
        .components()
        .iter()
        .map(|c| {
            let v = (0..fg.len())
                .map(|k| {
                    let y = fg.coords_of(k);
                    let p = [x0[0] + t * y[0], x0[1] + t * y[1]];
                    (bicubic(g, c.values(), p) / rho).max(0.0)
                })
                .collect();
            ScalarField::new(fg, v)
        })
        .collect::<Result<Vec<_>>>()?;
    let config = SegregatedConfig::with_measured_overlap(components, u.reaction().rescale(t, rho))?;
    let alpha = fit_alpha(&config)?;
    Ok(BlowupFrame {
        x0,
        t,
        rho,
        config,
        alpha,
    })
}

fn fit_alpha(config: &SegregatedConfig) -> Result<f64> {
    let radii = geometric_radii(ALPHA_FIT.0, ALPHA_FIT.1, 12);
    let mut pts = Vec::with_capacity(radii.len());
    for &r in &radii {
        let hr = average(config, [0.0, 0.0], r)?;
        if !(hr > TAU_H) {
            return Err(Error::DegenerateAverage { radius: r, value: hr });
        }
        pts.push((r.ln(), hr.ln()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(0.5 * sxy / sxx)
}

fn relative(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Compares `E, H, N` of the frame at `(y0, r)` with those of `u` at
/// `(x0 + t y0, t r)`, the first two divided by `ρ^2`.
pub fn scaling_identity_check(
    u: &SegregatedConfig,
    frame: &BlowupFrame,
    y0: Point,
    r: f64,
) -> Result<ScalingResiduals> {
    let x = [frame.x0[0] + frame.t * y0[0], frame.x0[1] + frame.t * y0[1]];
    let rho2 = frame.rho * frame.rho;
    let tr = frame.t * r;
    let ev = energy(&frame.config, y0, r)?;
    let hv = average(&frame.config, y0, r)?;
    let eu = energy(u, x, tr)? / rho2;
    let hu = average(u, x, tr)? / rho2;
    let nv = frequency(&frame.config, y0, r)?;
    let nu = frequency(u, x, tr)?;
    // E carries r^{2-N}, which the frame and the source agree on only in 2D
    debug_assert_eq!(DIM, 2);
    Ok(ScalingResiduals {
        energy: relative(ev, eu),
        average: relative(hv, hu),
        frequency: relative(nv, nu),
    })
}

/// [`scaling_identity_check`] on a fresh frame of `u` at `(x0, t)`.
pub fn scaling_identity_check_at(
    u: &SegregatedConfig,
    x0: Point,
    t: f64,
    y0: Point,
    r: f64,
) -> Result<ScalingResiduals> {
    scaling_identity_check(u, &make_frame(u, x0, t)?, y0, r)
}

/// `max |N(0, frame, r) - α|` over radii in [`HOMOGENEITY_RADII`].
pub fn homogeneity_residual(frame: &BlowupFrame) -> Result<f64> {
    let radii = geometric_radii(HOMOGENEITY_RADII.0, HOMOGENEITY_RADII.1, 14);
    let mut worst = 0.0_f64;
    for r in radii {
        worst = worst.max((frequency(&frame.config, [0.0, 0.0], r)? - frame.alpha).abs());
    }
    Ok(worst)
}

/// Max-norm differences on the unit ball between consecutive frames,
/// sampled on the nodes of the earlier frame.
pub fn frame_differences(frames: &[BlowupFrame]) -> Result<Vec<f64>> {
    frames
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0].config, &w[1].config);
            if a.h_components() != b.h_components() {
                return Err(Error::InvalidParams("frames have different component counts".into()));
            }
            let g = a.grid();
            let gb = b.grid();
            let mut worst = 0.0_f64;
            for k in 0..g.len() {
                let y = g.coords_of(k);
                if y[0] * y[0] + y[1] * y[1] > 1.0 {
                    continue;
                }
                for c in 0..a.h_components() {
                    let va = a.component(c).values()[k];
                    let vb = bicubic(gb, b.component(c).values(), y);
                    worst = worst.max((va - vb).abs());
                }
            }
            Ok(worst)
        })
        .collect()
}

/// Writes every frame component as `{stem}_{i}.{bin|csv}` with a header
/// carrying `x0`, `t`, `rho`, `alpha` and the component index.
pub fn write_frame(frame: &BlowupFrame, dir: &Path, stem: &str, format: FieldFormat) -> Result<Vec<PathBuf>> {
    let ext = match format {
        FieldFormat::Csv => "csv",
        FieldFormat::Bin => "bin",
    };
    let mut out = Vec::new();
    for (i, c) in frame.config.components().iter().enumerate() {
        let mut meta = serde_json::Map::new();
        meta.insert("x0".into(), serde_json::json!(frame.x0));
        meta.insert("t".into(), serde_json::json!(frame.t));
        meta.insert("rho".into(), serde_json::json!(frame.rho));
        meta.insert("alpha".into(), serde_json::json!(frame.alpha));
        meta.insert("component".into(), serde_json::json!(i));
        let path = dir.join(format!("{stem}_{i}.{ext}"));
        out.extend(write_field(c, &path, format, meta)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::almgren::ReactionSpec;
    use crate::solver::make_prototype;

    fn three_sector() -> SegregatedConfig {
        let g = Grid2D::square([0.0, 0.0], 1.0, 256).unwrap();
        make_prototype(3, g, &[0, 1, 2]).unwrap()
    }

    #[test]
    fn homogeneous_prototype_is_self_similar() {
        let u = three_sector();
        for t in [0.1, 0.25, 0.4] {
            let f = make_frame(&u, [0.0, 0.0], t).unwrap();
            assert!((f.alpha - 1.5).abs() < 0.02, "t = {t}: α = {}", f.alpha);
            let h1 = average(&f.config, [0.0, 0.0], 1.0).unwrap();
            assert!((h1 - 1.0).abs() < 1e-3, "H = {h1}");
            assert!(homogeneity_residual(&f).unwrap() < 0.02);
        }
        // frames at different scales agree up to interpolation error
        let frames: Vec<_> = [0.4, 0.2].iter().map(|&t| make_frame(&u, [0.0, 0.0], t).unwrap()).collect();
        assert!(frame_differences(&frames).unwrap()[0] < 1e-2);
    }

    #[test]
    fn planar_point_has_degree_one() {
        let g = Grid2D::square([0.0, 0.0], 1.0, 256).unwrap();
        let u = make_prototype(2, g, &[0, 1]).unwrap();
        let f = make_frame(&u, [0.0, 0.3], 0.1).unwrap();
        assert!((f.alpha - 1.0).abs() < 0.05, "α = {}", f.alpha);
    }

    #[test]
    fn aligned_frames_reproduce_source_quantities() {
        let u = three_sector();
        let h = u.grid().h();
        // t = 32 h: 4t/h = 128 cells with the source spacing
        let f = make_frame(&u, [0.0, 0.0], 32.0 * h).unwrap();
        assert_eq!(f.config.grid().nx(), 129);
        let res = scaling_identity_check(&u, &f, [0.0, 0.0], 0.7).unwrap();
        assert!(res.energy < 1e-6 && res.average < 1e-6 && res.frequency < 1e-6, "{res:?}");
    }

    #[test]
    fn generic_frames_satisfy_identities_up_to_interpolation() {
        let u = three_sector();
        let f = make_frame(&u, [0.0123, -0.0077], 0.2371).unwrap();
        let res = scaling_identity_check(&u, &f, [0.31, 0.17], 0.6).unwrap();
        assert!(res.energy < 1e-2 && res.average < 1e-2 && res.frequency < 1e-2, "{res:?}");
    }

    #[test]
    fn doubled_normalization_shows_in_energy_and_average_only() {
        let u = three_sector();
        let h = u.grid().h();
        let f = make_frame(&u, [0.0, 0.0], 32.0 * h).unwrap();
        let bad = BlowupFrame {
            config: f.config.scaled(0.5).unwrap(),
            ..f
        };
        let res = scaling_identity_check(&u, &bad, [0.0, 0.0], 0.7).unwrap();
        assert!((res.energy - 0.75).abs() < 1e-6 && (res.average - 0.75).abs() < 1e-6, "{res:?}");
        assert!(res.frequency < 1e-6);
    }

    #[test]
    fn mixed_degrees_are_not_homogeneous() {
        // w = r cos θ + 4 r^2 cos 2θ: N moves from 1 toward 2 across r ~ 1/4
        let g = Grid2D::square([0.0, 0.0], 1.0, 128).unwrap();
        let w = |x: f64, y: f64| x + 4.0 * (x * x - y * y);
        let comps = vec![
            ScalarField::from_fn(g, |x, y| w(x, y).max(0.0)).unwrap(),
            ScalarField::from_fn(g, |x, y| (-w(x, y)).max(0.0)).unwrap(),
        ];
        let u = SegregatedConfig::new(comps, ReactionSpec::zero(2), 0.0).unwrap();
        let f = make_frame(&u, [0.0, 0.0], 0.4).unwrap();
        assert!(homogeneity_residual(&f).unwrap() >= 0.2);
    }

    #[test]
    fn frames_are_written_with_metadata() {
        let u = three_sector();
        let f = make_frame(&u, [0.0, 0.0], 0.25).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_frame(&f, dir.path(), "frame", FieldFormat::Bin).unwrap();
        assert_eq!(paths.len(), 6);
        let (_, header) = crate::grid::io::read_field(&paths[0]).unwrap();
        assert_eq!(header.meta["t"], serde_json::json!(0.25));
        assert!((header.meta["alpha"].as_f64().unwrap() - f.alpha).abs() < 1e-15);
    }
}

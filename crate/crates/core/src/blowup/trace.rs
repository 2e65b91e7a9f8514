use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::almgren::DIM;
use crate::error::{Error, Result};
use crate::grid::bicubic;

use super::BlowupFrame;

/// Relative spread of arc eigenvalues accepted as a common value.
pub const CONSENSUS_TOL: f64 = 0.05;

/// A positivity interval `[start, end]` of one component on the circle;
/// `end` may exceed `2π` for the arc crossing angle zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub end: f64,
    pub length: f64,
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalTrace {
    pub radius: f64,
    /// Uniform on `[0, 2π)`.
    pub angles: Vec<f64>,
    /// `values[i][k]` is component `i` at `angles[k]`.
    pub values: Vec<Vec<f64>>,
    pub arcs: Vec<Arc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceCase {
    /// One arc covering the circle: `α = 1/2`, impossible for limits of
    /// admissible configurations.
    SingleArc,
    /// Two arcs: equal eigenvalues force two half circles and `α = 1`.
    TwoArcs,
    /// Three or more arcs: `α >= 3/2`.
    ThreeOrMore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalClassification {
    pub lengths: Vec<f64>,
    /// `(π / ℓ)^2`.
    pub eigenvalues: Vec<f64>,
    pub alphas: Vec<f64>,
    pub consensus: bool,
    pub case: TraceCase,
    pub min_alpha: f64,
}

/// Samples each component of the frame on the circle `|y| = radius` and
/// cuts it into arcs where the dominant component changes. Arc endpoints
/// are placed at the zero of `v_a - v_b` interpolated linearly between the
/// two samples around the change.
pub fn spherical_trace(frame: &BlowupFrame, radius: f64, n_angles: usize) -> Result<SphericalTrace> {
    let g = frame.config.grid();
    if n_angles < 8 {
        return Err(Error::InvalidParams(format!("need at least 8 angles, got {n_angles}")));
    }
    if !g.contains([radius, radius], 0.0) || !g.contains([-radius, -radius], 0.0) {
        return Err(Error::BallOutOfDomain {
            center: [0.0, 0.0],
            radius,
            margin: 0.0,
        });
    }
    let angles: Vec<f64> = (0..n_angles)
        .map(|k| 2.0 * PI * k as f64 / n_angles as f64)
        .collect();
    let values: Vec<Vec<f64>> = frame
        .config
        .components()
        .iter()
        .map(|c| {
            angles
                .iter()
                .map(|&a| bicubic(g, c.values(), [radius * a.cos(), radius * a.sin()]).max(0.0))
                .collect()
        })
        .collect();
    let arcs = arcs_from_samples(&angles, &values);
    Ok(SphericalTrace {
        radius,
        angles,
        values,
        arcs,
    })
}

fn arcs_from_samples(angles: &[f64], values: &[Vec<f64>]) -> Vec<Arc> {
    let n = angles.len();
    let step = 2.0 * PI / n as f64;
    let argmax = |k: usize| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in values.iter().enumerate() {
            if v[k] > 0.0 && best.is_none_or(|(_, b)| v[k] > b) {
                best = Some((i, v[k]));
            }
        }
        best.map(|b| b.0)
    };
    // vanishing samples inherit the label before them
    let mut labels: Vec<Option<usize>> = (0..n).map(argmax).collect();
    let Some(first) = labels.iter().position(Option::is_some) else {
        return Vec::new();
    };
    for s in 1..=n {
        let k = (first + s) % n;
        if labels[k].is_none() {
            labels[k] = labels[(k + n - 1) % n];
        }
    }
    let labels: Vec<usize> = labels.into_iter().map(Option::unwrap).collect();

    let mut cuts = Vec::new();
    for k in 0..n {
        let next = (k + 1) % n;
        let (a, b) = (labels[k], labels[next]);
        if a != b {
            let w0 = values[a][k] - values[b][k];
            let w1 = values[a][next] - values[b][next];
            let s = if w0 - w1 != 0.0 {
                (w0 / (w0 - w1)).clamp(0.0, 1.0)
            } else {
                0.5
            };
            cuts.push((angles[k] + s * step, b));
        }
    }
    if cuts.is_empty() {
        return vec![Arc {
            start: 0.0,
            end: 2.0 * PI,
            length: 2.0 * PI,
            component: labels[0],
        }];
    }
    (0..cuts.len())
        .map(|c| {
            let (start, component) = cuts[c];
            let mut end = cuts[(c + 1) % cuts.len()].0;
            if end <= start {
                end += 2.0 * PI;
            }
            Arc {
                start,
                end,
                length: end - start,
                component,
            }
        })
        .collect()
}

/// `α >= 0` solving `α (α + dim - 2) = λ`.
pub fn degree_from_eigenvalue(lambda: f64, dim: i32) -> f64 {
    let b = f64::from(dim - 2);
    0.5 * (-b + (b * b + 4.0 * lambda).sqrt())
}

/// Dirichlet eigenvalues `(π / ℓ)^2` of arcs of the given lengths and the
/// implied degrees.
pub fn classify_arcs(lengths: &[f64]) -> Result<SphericalClassification> {
    if lengths.is_empty() || lengths.iter().any(|&l| !(l > 0.0 && l <= 2.0 * PI + 1e-9)) {
        return Err(Error::InvalidParams(format!("arc lengths must lie in (0, 2π], got {lengths:?}")));
    }
    let eigenvalues: Vec<f64> = lengths.iter().map(|&l| (PI / l) * (PI / l)).collect();
    let alphas: Vec<f64> = eigenvalues.iter().map(|&l| degree_from_eigenvalue(l, DIM)).collect();
    let mean = eigenvalues.iter().sum::<f64>() / eigenvalues.len() as f64;
    let consensus = eigenvalues.iter().all(|&l| (l - mean).abs() <= CONSENSUS_TOL * mean);
    let case = match lengths.len() {
        1 => TraceCase::SingleArc,
        2 => TraceCase::TwoArcs,
        _ => TraceCase::ThreeOrMore,
    };
    let min_alpha = alphas.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SphericalClassification {
        lengths: lengths.to_vec(),
        eigenvalues,
        alphas,
        consensus,
        case,
        min_alpha,
    })
}

pub fn classify_trace(trace: &SphericalTrace) -> Result<SphericalClassification> {
    let lengths: Vec<f64> = trace.arcs.iter().map(|a| a.length).collect();
    classify_arcs(&lengths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::almgren::{ReactionSpec, SegregatedConfig};
    use crate::blowup::make_frame;
    use crate::grid::{Grid2D, ScalarField};
    use crate::solver::make_prototype;

    fn prototype_frame(m: usize, assignment: &[usize]) -> BlowupFrame {
        let g = Grid2D::square([0.0, 0.0], 1.0, 160).unwrap();
        let u = make_prototype(m, g, assignment).unwrap();
        make_frame(&u, [0.0, 0.0], 0.3).unwrap()
    }

    #[test]
    fn table_values() {
        let c = classify_arcs(&[2.0 * PI]).unwrap();
        assert_eq!(c.case, TraceCase::SingleArc);
        assert!((c.eigenvalues[0] - 0.25).abs() < 1e-12 && (c.alphas[0] - 0.5).abs() < 1e-12);
        let c = classify_arcs(&[PI, PI]).unwrap();
        assert!((c.eigenvalues[0] - 1.0).abs() < 1e-12 && (c.min_alpha - 1.0).abs() < 1e-12);
        assert!(c.consensus);
        let l = 2.0 * PI / 3.0;
        let c = classify_arcs(&[l, l, l]).unwrap();
        assert!((c.eigenvalues[0] - 2.25).abs() < 1e-12 && (c.min_alpha - 1.5).abs() < 1e-12);
        assert_eq!(c.case, TraceCase::ThreeOrMore);
    }

    #[test]
    fn unequal_arcs_break_consensus() {
        let c = classify_arcs(&[0.8 * PI, 1.2 * PI]).unwrap();
        assert!(!c.consensus);
        assert!(classify_arcs(&[]).is_err());
        assert!(classify_arcs(&[-1.0]).is_err());
    }

    #[test]
    fn higher_dimensional_degree() {
        // spherical harmonics of degree k on S^2: λ = k (k + 1)
        for k in 0..5 {
            let k = k as f64;
            assert!((degree_from_eigenvalue(k * (k + 1.0), 3) - k).abs() < 1e-12);
        }
    }

    #[test]
    fn prototype_traces_have_equal_arcs() {
        for (m, assignment) in [(2, vec![0, 1]), (3, vec![0, 1, 2]), (4, vec![0, 1, 0, 1])] {
            let trace = spherical_trace(&prototype_frame(m, &assignment), 1.0, 720).unwrap();
            assert_eq!(trace.arcs.len(), m);
            for a in &trace.arcs {
                assert!((a.length - 2.0 * PI / m as f64).abs() < 0.01, "m = {m}: {a:?}");
            }
            let total: f64 = trace.arcs.iter().map(|a| a.length).sum();
            assert!((total - 2.0 * PI).abs() < 1e-12);
            let c = classify_trace(&trace).unwrap();
            assert!(c.consensus);
            assert!((c.min_alpha - m as f64 / 2.0).abs() < 0.01);
        }
    }

    #[test]
    fn positive_component_is_one_arc() {
        let g = Grid2D::square([0.0, 0.0], 1.0, 64).unwrap();
        let f = ScalarField::from_fn(g, |_, _| 1.0).unwrap();
        let u = SegregatedConfig::new(vec![f], ReactionSpec::zero(1), 0.0).unwrap();
        let frame = make_frame(&u, [0.0, 0.0], 0.25).unwrap();
        let trace = spherical_trace(&frame, 1.0, 64).unwrap();
        assert_eq!(trace.arcs.len(), 1);
        assert_eq!(trace.arcs[0].length, 2.0 * PI);
        assert_eq!(classify_trace(&trace).unwrap().case, TraceCase::SingleArc);
    }
}

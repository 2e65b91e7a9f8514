use std::f64::consts::PI;

use proptest::prelude::*;
use seglab::almgren::{frequency, frequency_profile, monotonicity_check, ReactionSpec, SegregatedConfig};
use seglab::blowup::{classify_trace, make_frame, scaling_identity_check_at, spherical_trace, TraceCase};
use seglab::grid::{distance, Grid2D, Point, ScalarField};
use seglab::nodal::{classify_points, extract_nodal_set, Classification, ClassifyOptions};
use seglab::solver::{default_assignment, make_prototype};

fn prototype(m: usize, cells: usize) -> SegregatedConfig {
    let g = Grid2D::square([0.0, 0.0], 1.0, cells).unwrap();
    make_prototype(m, g, &default_assignment(m)).unwrap()
}

/// Positive and negative parts of `r^k cos(k(θ - φ))`.
fn rotated_harmonic(k: i32, phi: f64, cells: usize) -> SegregatedConfig {
    let g = Grid2D::square([0.0, 0.0], 1.0, cells).unwrap();
    let w = move |x: f64, y: f64| {
        let (r, t) = (x.hypot(y), y.atan2(x));
        r.powi(k) * (f64::from(k) * (t - phi)).cos()
    };
    let plus = ScalarField::from_fn(g, move |x, y| w(x, y).max(0.0)).unwrap();
    let minus = ScalarField::from_fn(g, move |x, y| (-w(x, y)).max(0.0)).unwrap();
    SegregatedConfig::new(vec![plus, minus], ReactionSpec::zero(2), 0.0).unwrap()
}

/// A point on the nodal set at least `away` from every junction and the origin.
fn interface_point(u: &SegregatedConfig, away: f64) -> Point {
    let set = extract_nodal_set(u, 0.0).unwrap();
    set.sample(0.05)
        .into_iter()
        .find(|&x| {
            set.distance_to_singular(x) >= away
                && distance(x, [0.0, 0.0]) >= away
                && u.grid().distance_to_boundary(x) >= 0.35
        })
        .expect("an interface point")
}

#[test]
fn regular_point_frames_split_the_circle_in_halves() {
    let u = prototype(3, 256);
    let x0 = interface_point(&u, 0.4);
    for t in [0.1, 0.05, 0.025] {
        let frame = make_frame(&u, x0, t).unwrap();
        assert!((frame.alpha - 1.0).abs() < 0.05, "t = {t}: alpha {}", frame.alpha);
        let cls = classify_trace(&spherical_trace(&frame, 1.0, 720).unwrap()).unwrap();
        assert_eq!(cls.case, TraceCase::TwoArcs, "t = {t}");
        assert_eq!(cls.lengths.len(), 2);
        for l in &cls.lengths {
            assert!((l - PI).abs() <= 0.05, "t = {t}: arc {l}");
        }
    }
}

#[test]
fn junction_frames_have_equal_arcs() {
    let u = prototype(4, 256);
    for t in [0.2, 0.1] {
        let frame = make_frame(&u, [0.0, 0.0], t).unwrap();
        let cls = classify_trace(&spherical_trace(&frame, 1.0, 720).unwrap()).unwrap();
        assert_eq!(cls.case, TraceCase::ThreeOrMore);
        assert!(cls.consensus);
        for l in &cls.lengths {
            assert!((l - PI / 2.0).abs() <= 0.05, "{:?}", cls.lengths);
        }
        assert!((cls.min_alpha - 2.0).abs() < 0.05);
    }
}

#[test]
fn homogeneous_prototypes_have_flat_monotone_profiles() {
    for m in [2, 3, 4] {
        let u = prototype(m, 256);
        let h = u.grid().h();
        let prof = frequency_profile(&u, [0.0, 0.0], 4.0 * h, 0.45, 12).unwrap();
        for n in &prof.frequency {
            assert!((n - m as f64 / 2.0).abs() < 0.05, "m = {m}: N = {n}");
        }
        let mono = monotonicity_check(&prof, u.d_bound()).unwrap();
        assert!(mono.max_violation <= 1e-12 && mono.c_tilde == 0.0, "m = {m}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn frequency_ignores_amplitude_and_labels(c in 0.01_f64..100.0, r in 0.1_f64..0.6, m in 2_usize..5) {
        let u = prototype(m, 128);
        let n = frequency(&u, [0.0, 0.0], r).unwrap();
        let scaled = SegregatedConfig::new(
            u.components().iter().map(|f| f.scaled(c).unwrap()).collect(),
            ReactionSpec::zero(u.h_components()),
            0.0,
        ).unwrap();
        prop_assert!((frequency(&scaled, [0.0, 0.0], r).unwrap() - n).abs() <= 1e-10 * n);
        let order: Vec<usize> = (0..u.h_components()).rev().collect();
        let swapped = u.permuted(&order).unwrap();
        prop_assert!((frequency(&swapped, [0.0, 0.0], r).unwrap() - n).abs() <= 1e-10 * n);
    }

    #[test]
    fn frequency_of_rotated_harmonics_is_the_degree(k in 1_i32..4, phi in 0.0_f64..(2.0 * PI), r in 0.15_f64..0.6) {
        let u = rotated_harmonic(k, phi, 192);
        let n = frequency(&u, [0.0, 0.0], r).unwrap();
        prop_assert!((n - f64::from(k)).abs() < 0.03, "k = {}, phi = {}, N = {}", k, phi, n);
    }

    #[test]
    fn classification_survives_a_one_step_window_shift(m in 2_usize..6, pick in 0.0_f64..1.0, step in prop::sample::select(vec![-1.0, 1.0])) {
        let u = prototype(m, 192);
        let set = extract_nodal_set(&u, 0.0).unwrap();
        let samples: Vec<Point> = set
            .sample(0.05)
            .into_iter()
            .filter(|&x| set.distance_to_singular(x) >= 0.45 && distance(x, [0.0, 0.0]) >= 0.45 && u.grid().distance_to_boundary(x) >= 0.3)
            .collect();
        let x = samples[((pick * samples.len() as f64) as usize).min(samples.len() - 1)];
        let points = [[0.0, 0.0], x];

        // r_min = 4h scale: a quarter of scale is one grid step, and 4h is the floor
        let base = ClassifyOptions { scale: 1.25, ..ClassifyOptions::default() };
        let shifted = ClassifyOptions { scale: 1.25 + 0.25 * step, ..base };
        let a = classify_points(&u, &set, &points, &base).unwrap();
        let b = classify_points(&u, &set, &points, &shifted).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert_eq!(p.classification, q.classification, "N0 {} vs {}", p.n0, q.n0);
        }
        let origin = if m == 2 { Classification::Regular } else { Classification::Singular };
        prop_assert_eq!(a[0].classification, origin);
        prop_assert_eq!(a[1].classification, Classification::Regular);
    }

    #[test]
    fn rescaled_frames_reproduce_source_quantities(
        t in 0.15_f64..0.3,
        y in -0.3_f64..0.3,
        r in 0.5_f64..0.9,
    ) {
        let u = prototype(4, 192);
        let res = scaling_identity_check_at(&u, [0.01, -0.02], t, [y, -0.5 * y], r).unwrap();
        prop_assert!(res.energy.max(res.average).max(res.frequency) < 1e-2, "{:?}", res);
    }
}

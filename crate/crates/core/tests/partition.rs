use std::f64::consts::PI;

use proptest::prelude::*;
use seglab::grid::{Grid2D, ScalarField};
use seglab::nodal::{extract_nodal_set, reflection_check};
use seglab::partition::{
    interface_scales, lambda1, objective, optimize_partition, optimize_partition_from, p_mean,
    partition_to_config, Domain, PartitionOptions,
};
use seglab::solver::{class_s_check, class_s_tolerance};
use seglab::Error;

fn quick() -> PartitionOptions {
    PartitionOptions {
        n_starts: 2,
        ..Default::default()
    }
}

#[test]
fn one_part_is_the_whole_domain() {
    let dom = Domain::rectangle(Grid2D::unit_square(48).unwrap());
    let (l, _) = lambda1(&dom).unwrap();
    for p in [1.0, 3.0, f64::INFINITY] {
        let part = optimize_partition(1, p, &dom, &quick(), 0).unwrap();
        assert_eq!(part.objective, l);
        assert_eq!(part.part_sizes()[0], dom.node_count());
    }
}

#[test]
fn two_parts_of_the_square_are_halves() {
    let g = Grid2D::unit_square(64).unwrap();
    let dom = Domain::rectangle(g);
    let part = optimize_partition(2, f64::INFINITY, &dom, &quick(), 7).unwrap();
    let target = 5.0 * PI * PI;
    assert!((part.objective - target).abs() < 0.03 * target, "{}", part.objective);
    let (lo, hi) = (part.eigenvalues[0].min(part.eigenvalues[1]), part.objective);
    assert!(hi - lo <= 0.05 * hi, "{:?}", part.eigenvalues);
    for (r, l) in part.relaxed_eigenvalues.iter().zip(&part.eigenvalues) {
        assert!((r - l).abs() < 0.03 * l, "relaxed {r} hard {l}");
    }

    // the interface is a mid-line along one axis
    let h = g.h();
    let r = g.idx(16, 16);
    let fits = |axis: usize| {
        let low = g.coords_of(r)[axis] < 0.5;
        (0..g.len()).all(|k| {
            let x = g.coords_of(k)[axis];
            let lab = part.labels[k];
            lab == 0 || (x - 0.5).abs() <= 2.0 * h || (lab == part.labels[r]) == ((x < 0.5) == low)
        })
    };
    assert!(fits(0) || fits(1));

    let a = interface_scales(&part).unwrap();
    assert!((a[0] / a[1] - 1.0).abs() < 0.05, "{a:?}");
    let u = partition_to_config(&part).unwrap();
    let cs = class_s_check(&u);
    assert!(cs.subsolution <= class_s_tolerance(&u), "{cs:?}");
    let set = extract_nodal_set(&u, 0.0).unwrap();
    let mut checked = 0;
    for x in set.sample(0.1) {
        if g.distance_to_boundary(x) < 0.2 {
            continue;
        }
        let rep = reflection_check(&u, &set, x, 3.0 * h).unwrap();
        assert!(rep.mismatch <= 0.1, "{x:?}: {}", rep.mismatch);
        checked += 1;
    }
    assert!(checked >= 3);
}

#[test]
fn swapping_initial_components_swaps_the_parts() {
    let g = Grid2D::unit_square(48).unwrap();
    let dom = Domain::rectangle(g);
    let left = ScalarField::from_fn(g, |x, y| if x + 0.3 * y < 0.6 { 1.0 } else { 0.0 }).unwrap();
    let right = ScalarField::from_fn(g, |x, y| if x + 0.3 * y < 0.6 { 0.0 } else { 1.0 }).unwrap();
    let opts = PartitionOptions::default();
    let a = optimize_partition_from(f64::INFINITY, &dom, &opts, &[left.clone(), right.clone()], 0).unwrap();
    let b = optimize_partition_from(f64::INFINITY, &dom, &opts, &[right, left], 0).unwrap();
    assert_eq!(a.objective, b.objective);
    assert_eq!(a.eigenvalues[0], b.eigenvalues[1]);
    for k in 0..g.len() {
        let swapped = [0, 2, 1][b.labels[k]];
        assert_eq!(a.labels[k], swapped);
    }
}

#[test]
fn penalized_energy_descends_within_each_stage_for_p_one() {
    let dom = Domain::rectangle(Grid2D::unit_square(40).unwrap());
    let opts = PartitionOptions {
        n_starts: 1,
        beta_ladder: vec![1e2, 1e3, 1e4],
        linear_tol: 1e-12,
        ..Default::default()
    };
    let part = optimize_partition(2, 1.0, &dom, &opts, 3).unwrap();
    for w in part.history.windows(2) {
        if w[0].beta == w[1].beta {
            assert!(w[1].energy <= w[0].energy * (1.0 + 1e-6), "{:?} -> {:?}", w[0], w[1]);
        }
    }
}

#[test]
fn objective_grows_with_p_on_a_fixed_partition() {
    let dom = Domain::rectangle(Grid2D::unit_square(40).unwrap());
    let opts = PartitionOptions {
        n_starts: 1,
        beta_ladder: vec![1e2, 1e3, 1e4],
        ..Default::default()
    };
    let part = optimize_partition(3, 2.0, &dom, &opts, 11).unwrap();
    let mut last = 0.0;
    for p in [1.0, 2.0, 8.0, 32.0, f64::INFINITY] {
        let v = objective(&part, p).value;
        assert!(v >= last - 1e-12);
        last = v;
    }
}

#[test]
fn large_p_objectives_approach_the_max_objective() {
    let g = Grid2D::new(49, 33, 1.0 / 32.0, [0.0, 0.0]).unwrap();
    let dom = Domain::rectangle(g);
    let opts = PartitionOptions {
        n_starts: 1,
        beta_ladder: vec![1e2, 1e3, 1e4, 1e5],
        ..Default::default()
    };
    let inf = optimize_partition(3, f64::INFINITY, &dom, &opts, 5).unwrap().objective;
    let gaps: Vec<f64> = [1.0, 8.0, 32.0]
        .iter()
        .map(|&p| {
            let part = optimize_partition(3, p, &dom, &opts, 5).unwrap();
            (objective(&part, f64::INFINITY).value - inf).abs() / inf
        })
        .collect();
    assert!(gaps[2] <= gaps[0] + 1e-3, "{gaps:?}");
    assert!(gaps[2] < 0.05, "{gaps:?}");
}

#[test]
fn empty_initial_component_is_a_degenerate_seed() {
    let g = Grid2D::unit_square(32).unwrap();
    let dom = Domain::rectangle(g);
    let one = ScalarField::from_fn(g, |_, _| 1.0).unwrap();
    let zero = ScalarField::zeros(g);
    let err = optimize_partition_from(2.0, &dom, &quick(), &[one, zero], 9).unwrap_err();
    assert!(matches!(err, Error::DegenerateSeed { seed: 9, component: 1 }));
    assert!(optimize_partition(2, 0.5, &dom, &quick(), 0).is_err());
}

#[test]
fn partition_files_are_written() {
    let dom = Domain::rectangle(Grid2D::unit_square(32).unwrap());
    let opts = PartitionOptions {
        n_starts: 1,
        beta_ladder: vec![1e2, 1e3],
        ..Default::default()
    };
    let part = optimize_partition(2, f64::INFINITY, &dom, &opts, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = interface_scales(&part).unwrap();
    let files = part.write(dir.path(), &a).unwrap();
    assert_eq!(files.len(), 3);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files[1]).unwrap()).unwrap();
    assert_eq!(json["p"], "inf");
    assert_eq!(json["parts"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(&files[0]).unwrap();
    assert_eq!(csv.lines().count(), 1 + 33 * 33);
}

proptest! {
    #[test]
    fn p_mean_is_monotone_and_bounded(
        l in proptest::collection::vec(0.1f64..100.0, 1..6),
        p in 1.0f64..50.0,
        dp in 0.0f64..50.0,
    ) {
        let a = p_mean(&l, p);
        let b = p_mean(&l, p + dp);
        let lo = l.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p_mean(&l, f64::INFINITY);
        prop_assert!(a <= b * (1.0 + 1e-12));
        prop_assert!(a >= lo * (1.0 - 1e-12) && b <= hi * (1.0 + 1e-12));
    }
}

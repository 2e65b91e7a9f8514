//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the report is always printed; exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use seglab::almgren::{
    average, doubling_check, frequency_profile, monotonicity_check, Reaction, ReactionSpec, SegregatedConfig,
};
use seglab::blowup::{classify_arcs, make_frame, scaling_identity_check};
use seglab::grid::{distance, Grid2D, Point};
use seglab::nodal::{
    classify_points, equal_angle_check, extract_nodal_set, flatness_scan, reflection_check, Classification,
    ClassifyOptions,
};
use seglab::partition::{lambda1, optimize_partition, partition_to_config, Domain, PartitionOptions};
use seglab::solver::{
    beta_continuation, class_s_check, class_s_tolerance, make_prototype, planar_traces, Competition,
    CompetitionParams, Init, SolveOptions,
};

type Outcome = Result<String, String>;

const LADDER: [f64; 4] = [10.0, 1e2, 1e3, 1e4];
/// Trace amplitude of the GP ladder.
const GP_AMPLITUDE: f64 = 100.0;
const J01: f64 = 2.404_825_557_695_773;

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c1() -> Outcome {
    let l3 = 2.0 * PI / 3.0;
    let rows = [(vec![2.0 * PI], 0.5), (vec![PI, PI], 1.0), (vec![l3, l3, l3], 1.5)];
    let mut worst = 0.0_f64;
    for (arcs, alpha) in rows {
        let c = classify_arcs(&arcs).map_err(|e| e.to_string())?;
        for a in &c.alphas {
            worst = worst.max((a - alpha).abs());
        }
        worst = worst.max((c.min_alpha - alpha).abs());
    }
    check(worst <= 1e-12, format!("max |α - table| = {worst:.1e}"))
}

fn c2() -> Outcome {
    let g = Grid2D::square([0.0, 0.0], 1.0, 512).map_err(|e| e.to_string())?;
    let h = g.h();
    let u = make_prototype(3, g, &[0, 1, 2]).map_err(|e| e.to_string())?;
    let prof = frequency_profile(&u, [0.0, 0.0], 6.0 * h, 0.3, 16).map_err(|e| e.to_string())?;
    let n_dev = prof.frequency.iter().fold(0.0_f64, |m, n| m.max((n - 1.5).abs()));

    let set = extract_nodal_set(&u, 0.0).map_err(|e| e.to_string())?;
    let origin = set
        .singular_candidates
        .iter()
        .copied()
        .min_by(|a, b| distance(*a, [0.0, 0.0]).total_cmp(&distance(*b, [0.0, 0.0])))
        .ok_or("no singular candidate")?;
    let opts = ClassifyOptions::default();
    let rep = &classify_points(&u, &set, &[origin], &opts).map_err(|e| e.to_string())?[0];
    let angle_dev = equal_angle_check(rep).to_degrees();

    let samples: Vec<Point> = set
        .sample(0.05)
        .into_iter()
        .filter(|&x| set.distance_to_singular(x) >= 0.2 && g.distance_to_boundary(x) >= 0.3)
        .collect();
    let reps = classify_points(&u, &set, &samples, &opts).map_err(|e| e.to_string())?;
    let mut off_dev = 0.0_f64;
    let mut mismatch = 0.0_f64;
    let mut regular = true;
    for r in &reps {
        regular &= r.classification == Classification::Regular;
        off_dev = off_dev.max((r.n0 - 1.0).abs());
        let refl = reflection_check(&u, &set, r.location, 3.0 * h).map_err(|e| e.to_string())?;
        mismatch = mismatch.max(refl.mismatch);
    }
    let ok = n_dev <= 0.05
        && rep.classification == Classification::Singular
        && rep.branch_count == 3
        && angle_dev <= 3.0
        && samples.len() >= 10
        && regular
        && off_dev <= 0.05
        && mismatch <= 0.02;
    check(
        ok,
        format!(
            "max |N - 1.5| = {n_dev:.4}; origin N0 {:.3} {:?} with {} branches, angle dev {angle_dev:.2}°; \
             {} off-origin points regular: {regular}, max |N0 - 1| = {off_dev:.4}, max mismatch = {mismatch:.4}",
            rep.n0,
            rep.classification,
            rep.branch_count,
            samples.len()
        ),
    )
}

/// Floor below which a monotonicity violation counts as zero.
const ROUNDOFF: f64 = 1e-12;

fn c3() -> Outcome {
    let g = Grid2D::square([0.0, 0.0], 1.0, 256).map_err(|e| e.to_string())?;
    let h = g.h();
    let u = make_prototype(2, g, &[0, 1]).map_err(|e| e.to_string())?;
    let prof = frequency_profile(&u, [0.0, 0.0], 4.0 * h, 0.45, 16).map_err(|e| e.to_string())?;
    let n_dev = prof.frequency.iter().fold(0.0_f64, |m, n| m.max((n - 1.0).abs()));
    let mono = monotonicity_check(&prof, u.d_bound()).map_err(|e| e.to_string())?;
    let mut ratio_dev = 0.0_f64;
    for r in [0.05, 0.1, 0.2] {
        let d = doubling_check(&u, [0.0, 0.0], r, 2.0 * r, mono.c_tilde, &prof).map_err(|e| e.to_string())?;
        ratio_dev = ratio_dev.max((d.ratio / 4.0 - 1.0).abs());
    }
    let ok = n_dev <= 0.01 && mono.c_tilde == 0.0 && mono.max_violation <= ROUNDOFF && ratio_dev <= 0.01;
    check(
        ok,
        format!(
            "max |N - 1| = {n_dev:.2e}; C̃ = {}, violation = {:.1e}; max |H(2r)/H(r)/4 - 1| = {ratio_dev:.2e}",
            mono.c_tilde, mono.max_violation
        ),
    )
}

fn c4() -> Outcome {
    let g = Grid2D::unit_square(256).map_err(|e| e.to_string())?;
    let h = g.h();
    let bc = planar_traces(&g, GP_AMPLITUDE).map_err(|e| e.to_string())?;
    let problem = Competition::Gp(CompetitionParams::uniform(2, 0.0, 0.0, LADDER[0]));
    let runs = beta_continuation(&problem, &bc, g, &Init::Harmonic, &LADDER, &SolveOptions::default())
        .map_err(|e| e.to_string())?;
    let overlap: Vec<f64> = runs.iter().map(|(_, r)| r.interaction).collect();
    let decreasing = overlap.windows(2).all(|w| w[1] < w[0]);
    let reduction = overlap[overlap.len() - 1] / overlap[0];
    let u = &runs.last().unwrap().0;
    let eps = u.eps_seg();
    let revalidated = SegregatedConfig::new(u.components().to_vec(), u.reaction().clone(), 1e-3).is_ok();

    let r_max = 0.25;
    let set = extract_nodal_set(u, 0.0).map_err(|e| e.to_string())?;
    let centers: Vec<Point> = set
        .sample(0.04)
        .into_iter()
        .filter(|&x| g.distance_to_boundary(x) >= r_max + 3.0 * h)
        .collect();
    let (mut n0_dev, mut c_max, mut viol, mut mismatch) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for &x in &centers {
        let prof = frequency_profile(u, x, 4.0 * h, r_max, 16).map_err(|e| e.to_string())?;
        let mono = monotonicity_check(&prof, u.d_bound()).map_err(|e| e.to_string())?;
        n0_dev = n0_dev.max((mono.n0 - 1.0).abs());
        c_max = c_max.max(mono.c_tilde);
        viol = viol.max(mono.max_violation);
        let refl = reflection_check(u, &set, x, 3.0 * h).map_err(|e| e.to_string())?;
        mismatch = mismatch.max(refl.mismatch);
    }
    let ok = decreasing
        && reduction <= 1e-3
        && eps <= 1e-3
        && revalidated
        && centers.len() >= 10
        && n0_dev <= 0.15
        && c_max <= 10.0
        && viol <= 1e-2
        && mismatch <= 0.1;
    check(
        ok,
        format!(
            "overlap [{}] (final/initial {reduction:.1e}); eps_seg {eps:.1e}; {} centers: \
             max |N0 - 1| = {n0_dev:.3}, max C̃ = {c_max:.3}, max violation = {viol:.1e}, max mismatch = {mismatch:.3}",
            overlap.iter().map(|o| format!("{o:.3e}")).collect::<Vec<_>>().join(", "),
            centers.len()
        ),
    )
}

fn c5() -> Outcome {
    let g = Grid2D::unit_square(256).map_err(|e| e.to_string())?;
    let amplitude = 1.0;
    let bc = planar_traces(&g, amplitude).map_err(|e| e.to_string())?;
    let reaction = ReactionSpec::new(vec![
        Reaction::Logistic {
            rate: 1.0,
            capacity: 2.0 * amplitude,
        };
        2
    ])
    .map_err(|e| e.to_string())?;
    let problem = Competition::Lv {
        reaction,
        beta: LADDER[0],
    };
    let runs = beta_continuation(&problem, &bc, g, &Init::Harmonic, &LADDER, &SolveOptions::default())
        .map_err(|e| e.to_string())?;
    let u = &runs.last().unwrap().0;
    let rep = class_s_check(u);
    let tau = class_s_tolerance(u);
    check(
        rep.passes(tau),
        format!(
            "subsolution {:.2e}, reflected supersolution {:.2e}, τ = {tau:.2e}",
            rep.subsolution, rep.reflected_supersolution
        ),
    )
}

fn c6() -> Outcome {
    let dom = Domain::rectangle(Grid2D::unit_square(128).map_err(|e| e.to_string())?);
    let part = optimize_partition(2, f64::INFINITY, &dom, &PartitionOptions::default(), 1).map_err(|e| e.to_string())?;
    let target = 5.0 * PI * PI;
    let rel = (part.objective - target).abs() / target;
    let (a, b) = (part.eigenvalues[0], part.eigenvalues[1]);
    let spread = (a - b).abs() / a.max(b);
    check(
        rel <= 0.03 && spread <= 0.05,
        format!(
            "objective {:.4} vs 5π² ({:.2}%), eigenvalues {a:.4}/{b:.4} ({:.2}% apart)",
            part.objective,
            100.0 * rel,
            100.0 * spread
        ),
    )
}

fn c7() -> Outcome {
    let g = Grid2D::square([0.0, 0.0], 1.05, 128).map_err(|e| e.to_string())?;
    let h = g.h();
    let dom = Domain::disk(g, [0.0, 0.0], 1.0);
    let part = optimize_partition(3, f64::INFINITY, &dom, &PartitionOptions::default(), 1).map_err(|e| e.to_string())?;
    let u = partition_to_config(&part).map_err(|e| e.to_string())?;
    let set = extract_nodal_set(&u, 0.0).map_err(|e| e.to_string())?;
    // interior: at least 8h inside the disk
    let interior: Vec<Point> = set
        .singular_candidates
        .iter()
        .copied()
        .filter(|c| distance(*c, [0.0, 0.0]) <= 1.0 - 8.0 * h)
        .collect();
    let reps = classify_points(&u, &set, &interior, &ClassifyOptions::default()).map_err(|e| e.to_string())?;
    let singular: Vec<_> = reps.iter().filter(|r| r.classification == Classification::Singular).collect();
    if singular.len() != 1 {
        return Err(format!("{} interior singular points (candidates {interior:?})", singular.len()));
    }
    let s = singular[0];
    let dev = equal_angle_check(s).to_degrees();
    check(
        s.branch_count == 3 && dev <= 5.0,
        format!(
            "one singular point at ({:.4}, {:.4}), N0 {:.3}, {} branches, angle dev {dev:.2}°; eigenvalues {:.3?}",
            s.location[0], s.location[1], s.n0, s.branch_count, part.eigenvalues
        ),
    )
}

fn c8() -> Outcome {
    let g = Grid2D::square([0.0, 0.0], 1.0, 256).map_err(|e| e.to_string())?;
    let h = g.h();
    let u = make_prototype(3, g, &[0, 1, 2]).map_err(|e| e.to_string())?;
    let aligned = make_frame(&u, [0.0, 0.0], 32.0 * h).map_err(|e| e.to_string())?;
    let a = scaling_identity_check(&u, &aligned, [0.0, 0.0], 0.7).map_err(|e| e.to_string())?;
    let generic = make_frame(&u, [0.0123, -0.0077], 0.2371).map_err(|e| e.to_string())?;
    let b = scaling_identity_check(&u, &generic, [0.31, 0.17], 0.6).map_err(|e| e.to_string())?;
    let amax = a.energy.max(a.average).max(a.frequency);
    let bmax = b.energy.max(b.average).max(b.frequency);
    let h1 = average(&generic.config, [0.0, 0.0], 1.0).map_err(|e| e.to_string())?;
    check(
        amax <= 1e-6 && bmax <= 1e-2,
        format!("aligned max residual {amax:.1e}; generic max residual {bmax:.1e}; H(0, frame, 1) = {h1:.6}"),
    )
}

fn c9() -> Outcome {
    let square = Grid2D::unit_square(128).map_err(|e| e.to_string())?;
    let (l_sq, _) = lambda1(&Domain::rectangle(square)).map_err(|e| e.to_string())?;
    let half = (0..square.len()).map(|k| square.coords_of(k)[0] < 0.5 - 1e-12).collect();
    let (l_half, _) = lambda1(&Domain::from_mask(square, half)).map_err(|e| e.to_string())?;
    let dg = Grid2D::square([0.0, 0.0], 1.05, 128).map_err(|e| e.to_string())?;
    let (l_disk, _) = lambda1(&Domain::disk(dg, [0.0, 0.0], 1.0)).map_err(|e| e.to_string())?;
    let e1 = (l_sq / (2.0 * PI * PI) - 1.0).abs();
    let e2 = (l_half / (5.0 * PI * PI) - 1.0).abs();
    let e3 = (l_disk / (J01 * J01) - 1.0).abs();
    check(
        e1 <= 5e-3 && e2 <= 5e-3 && e3 <= 1e-2,
        format!(
            "square {l_sq:.4} ({:.3}%), half-square {l_half:.4} ({:.3}%), disk {l_disk:.4} ({:.3}%)",
            100.0 * e1,
            100.0 * e2,
            100.0 * e3
        ),
    )
}

fn c10() -> Outcome {
    let g = Grid2D::square([0.0, 0.0], 1.0, 256).map_err(|e| e.to_string())?;
    let h = g.h();
    let radii: Vec<f64> = (0..12).map(|k| 8.0 * h * (0.3 / (8.0 * h)).powf(k as f64 / 11.0)).collect();

    let u2 = make_prototype(2, g, &[0, 1]).map_err(|e| e.to_string())?;
    let set2 = extract_nodal_set(&u2, 0.0).map_err(|e| e.to_string())?;
    let mut flat_excess = f64::NEG_INFINITY;
    for x in [[0.0, 0.0], [0.0, 0.3], [0.0, -0.45]] {
        for rep in flatness_scan(&u2, &set2, x, &radii).map_err(|e| e.to_string())? {
            flat_excess = flat_excess.max(rep.delta - 2.0 * h / rep.radius);
        }
    }

    let u3 = make_prototype(3, g, &[0, 1, 2]).map_err(|e| e.to_string())?;
    let set3 = extract_nodal_set(&u3, 0.0).map_err(|e| e.to_string())?;
    let min3 = flatness_scan(&u3, &set3, [0.0, 0.0], &radii)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|r| r.delta)
        .fold(f64::INFINITY, f64::min);
    check(
        flat_excess <= 0.0 && min3 >= 0.2,
        format!("m=2: max (δ - 2h/r) = {flat_excess:.2e}; m=3 origin: min δ = {min3:.4}"),
    )
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 10] = [
        ("spherical classification table", 1.0, c1),
        ("m=3 prototype frequency gap", 30.0, c2),
        ("m=2 prototype monotonicity and doubling", 10.0, c3),
        ("GP beta continuation", 300.0, c4),
        ("Lotka-Volterra class S", 300.0, c5),
        ("partition h=2 square", 180.0, c6),
        ("partition h=3 disk", 300.0, c7),
        ("scaling identities", 5.0, c8),
        ("lambda1 closed forms", 30.0, c9),
        ("flatness dichotomy", 10.0, c10),
    ];
    let mut failures = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        let in_time = secs <= *budget;
        let (pass, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        failures += usize::from(!pass);
        println!(
            "criterion {:>2} {}: {name}: {detail} [{secs:.1}s of {budget}s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

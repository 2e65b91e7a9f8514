//! Invariant suite on the homogeneous prototypes.

use serde::Serialize;
use serde_json::json;

use seglab::almgren::{frequency_profile, monotonicity_check};
use seglab::blowup::{classify_trace, homogeneity_residual, make_frame, scaling_identity_check_at, spherical_trace, TraceCase};
use seglab::grid::{distance, Grid2D, Point};
use seglab::nodal::{classify_points, equal_angle_check, extract_nodal_set, reflection_check, Classification, ClassifyOptions};
use seglab::solver::{class_s_check_away_from, class_s_tolerance, default_assignment, make_prototype};

use crate::config::ValidateBlock;
use crate::error::CliResult;
use crate::report::{Ctx, StageOutput, StageResultExt};

/// Class-S defects are not checked this close to a junction, where the
/// 5-point truncation error of `r^{m/2}` exceeds the `O(h^2)` tolerance.
const JUNCTION_EXCLUSION: f64 = 0.2;

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    limit: f64,
    pass: bool,
}

fn at_most(name: &'static str, value: f64, limit: f64) -> Check {
    Check {
        name,
        value,
        limit,
        pass: value <= limit,
    }
}

fn prototype_checks(m: usize, cells: usize, tol: crate::tolerance::Tolerances) -> seglab::Result<Vec<Check>> {
    let g = Grid2D::square([0.0, 0.0], 1.0, cells)?;
    let h = g.h();
    let u = make_prototype(m, g, &default_assignment(m))?;
    let alpha = m as f64 / 2.0;
    let origin: Point = [0.0, 0.0];
    let mut out = Vec::new();

    let prof = frequency_profile(&u, origin, 4.0 * h, 0.45, 16)?;
    let n_dev = prof.frequency.iter().fold(0.0_f64, |a, n| a.max((n - alpha).abs()));
    out.push(at_most("frequency_constant", n_dev, tol.n0));
    let mono = monotonicity_check(&prof, u.d_bound())?;
    out.push(at_most("monotonicity_c_tilde", mono.c_tilde, 0.0));

    let set = extract_nodal_set(&u, 0.0)?;
    let center = set
        .singular_candidates
        .iter()
        .copied()
        .filter(|&c| distance(c, origin) <= 2.0 * h)
        .min_by(|a, b| distance(*a, origin).total_cmp(&distance(*b, origin)))
        .unwrap_or(origin);
    let opts = ClassifyOptions::default();
    let rep = &classify_points(&u, &set, &[center], &opts)?[0];
    let (class_ok, branches_ok) = if m == 2 {
        (rep.classification == Classification::Regular, rep.branch_count == 2)
    } else {
        (rep.classification == Classification::Singular, rep.branch_count == m)
    };
    out.push(at_most("origin_class", f64::from(u8::from(!class_ok)), 0.0));
    out.push(at_most("origin_branches", f64::from(u8::from(!branches_ok)), 0.0));
    out.push(at_most("origin_n0", (rep.n0 - alpha).abs(), tol.n0));
    if m > 2 {
        out.push(at_most("equal_angles_deg", equal_angle_check(rep).to_degrees(), tol.angle_deg));
    }

    let samples: Vec<Point> = set
        .sample(0.1)
        .into_iter()
        .filter(|&x| set.distance_to_singular(x) >= 0.2 && distance(x, origin) >= 0.2 && g.distance_to_boundary(x) >= 0.3)
        .collect();
    let mut n0_dev = 0.0_f64;
    let mut mismatch = 0.0_f64;
    let mut regular = true;
    for r in classify_points(&u, &set, &samples, &opts)? {
        regular &= r.classification == Classification::Regular;
        n0_dev = n0_dev.max((r.n0 - 1.0).abs());
        mismatch = mismatch.max(reflection_check(&u, &set, r.location, 3.0 * h)?.mismatch);
    }
    out.push(at_most("interface_points_regular", f64::from(u8::from(!regular || samples.is_empty())), 0.0));
    out.push(at_most("interface_n0", n0_dev, tol.n0));
    out.push(at_most("reflection_mismatch", mismatch, tol.reflection_mismatch));

    let junctions: Vec<Point> = if m > 2 { vec![center] } else { Vec::new() };
    let cs = class_s_check_away_from(&u, &junctions, JUNCTION_EXCLUSION);
    let tau = class_s_tolerance(&u);
    out.push(at_most("class_s_subsolution", cs.subsolution, tau));
    out.push(at_most("class_s_reflected", cs.reflected_supersolution, tau));

    let frame = make_frame(&u, origin, 0.25)?;
    out.push(at_most("blowup_alpha", (frame.alpha - alpha).abs(), tol.n0));
    out.push(at_most("blowup_homogeneity", homogeneity_residual(&frame)?, tol.n0));
    let cls = classify_trace(&spherical_trace(&frame, 1.0, 720)?)?;
    let case = if m == 2 { TraceCase::TwoArcs } else { TraceCase::ThreeOrMore };
    out.push(at_most("trace_case", f64::from(u8::from(cls.case != case || !cls.consensus)), 0.0));
    out.push(at_most("trace_alpha", (cls.min_alpha - alpha).abs(), tol.n0));

    let res = scaling_identity_check_at(&u, [0.0123, -0.0077], 0.2371, [0.31, 0.17], 0.6)?;
    out.push(at_most("scaling_identities", res.energy.max(res.average).max(res.frequency), tol.scaling));
    Ok(out)
}

/// One stage per degree; each writes `validate/m{m}.json`.
pub fn validate_suite(ctx: &mut Ctx, block: &ValidateBlock) -> CliResult<()> {
    for &m in &block.degrees {
        ctx.stage(&format!("validate_m{m}"), |ctx| {
            let checks = prototype_checks(m, block.cells, ctx.tol).staged()?;
            ctx.write_json(&format!("validate/m{m}.json"), &checks)?;
            let pass = checks.iter().all(|c| c.pass);
            let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
            Ok(StageOutput::new(pass, json!({ "checks": checks.len(), "failed": failed }), ()))
        })?;
    }
    Ok(())
}

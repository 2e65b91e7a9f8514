//! Per-center diagnostics on a segregated configuration: frequency profile,
//! monotonicity, classification, reflection and angle checks.

use serde::{Deserialize, Serialize};

use seglab::almgren::{frequency_profile, monotonicity_check, ProfileMetadata, SegregatedConfig};
use seglab::grid::{distance, Point};
use seglab::nodal::{
    classify_points, equal_angle_check, extract_nodal_set, reflection_check, Classification,
    ClassifyOptions, NodalSet,
};
use seglab::Error;

use crate::config::{AnalysisSpec, CentersSpec};
use crate::error::CliResult;
use crate::report::{Ctx, StageOutput, StageResultExt};

/// Profiles start at `4h`; a center needs `r_max >= ROOM_CELLS * h`.
const ROOM_CELLS: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterReport {
    pub index: usize,
    pub center: Point,
    pub on_nodal_set: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(rename = "N0")]
    pub n0: Option<f64>,
    pub class: Option<Classification>,
    pub branch_count: Option<usize>,
    #[serde(rename = "C_tilde")]
    pub c_tilde: Option<f64>,
    pub monotone: Option<bool>,
    pub reflection_mismatch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection_error: Option<String>,
    /// Radians.
    pub angle_deviation: Option<f64>,
    /// `None` for centers that could not be checked.
    pub pass: Option<bool>,
}

impl CenterReport {
    fn empty(index: usize, center: Point, on_nodal_set: bool) -> Self {
        Self {
            index,
            center,
            on_nodal_set,
            error: None,
            n0: None,
            class: None,
            branch_count: None,
            c_tilde: None,
            monotone: None,
            reflection_mismatch: None,
            reflection_error: None,
            angle_deviation: None,
            pass: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
    pub singular_candidates: Vec<Point>,
    pub centers: Vec<CenterReport>,
}

/// Largest profile radius at `x`: inside the grid with a `2h` margin and
/// within half the distance to any other singular candidate.
fn room(u: &SegregatedConfig, set: &NodalSet, x: Point, r_max: f64) -> f64 {
    let g = u.grid();
    let h = g.h();
    let other = set
        .singular_candidates
        .iter()
        .map(|&c| distance(c, x))
        .filter(|&d| d > 4.0 * h)
        .fold(f64::INFINITY, f64::min);
    r_max.min(g.distance_to_boundary(x) - 2.0 * h).min(0.5 * other)
}

fn centers(u: &SegregatedConfig, set: &NodalSet, spec: &AnalysisSpec) -> Vec<Point> {
    match &spec.centers {
        CentersSpec::List(list) => list.clone(),
        CentersSpec::Auto(_) => {
            let h = u.grid().h();
            // polyline samples next to a junction duplicate the candidate
            let samples = set
                .sample(spec.spacing)
                .into_iter()
                .filter(|&x| set.distance_to_singular(x) >= ROOM_CELLS * h);
            set.singular_candidates
                .iter()
                .copied()
                .chain(samples)
                .filter(|&x| room(u, set, x, spec.r_max) >= ROOM_CELLS * h)
                .collect()
        }
    }
}

fn check_center(
    ctx: &mut Ctx,
    u: &SegregatedConfig,
    set: &NodalSet,
    spec: &AnalysisSpec,
    index: usize,
    x: Point,
) -> CliResult<CenterReport> {
    let h = u.grid().h();
    let tol = ctx.tol;
    let on_set = set.project(x).is_some_and(|(_, d, _)| d <= 2.0 * h);
    let mut rep = CenterReport::empty(index, x, on_set);
    let r_max = room(u, set, x, spec.r_max);
    if !u.grid().contains(x, 0.0) || r_max < ROOM_CELLS * h {
        rep.error = Some(format!("no room for a profile (r_max {r_max:.4}, needs {:.4})", ROOM_CELLS * h));
        return Ok(rep);
    }
    let prof = match frequency_profile(u, x, 4.0 * h, r_max, spec.n_radii) {
        Ok(p) => p,
        Err(e) => {
            rep.error = Some(e.to_string());
            return Ok(rep);
        }
    };
    let mono = match monotonicity_check(&prof, u.d_bound()) {
        Ok(m) => Some(m),
        Err(Error::NonMonotone { .. }) => None,
        Err(e) => return Err(e).staged(),
    };
    let stem = format!("diagnose/profiles/c{index:03}");
    ctx.write_text(&format!("{stem}.csv"), &prof.to_csv())?;
    ctx.write_json(&format!("{stem}.json"), &ProfileMetadata::new(&prof, mono.as_ref()))?;
    rep.monotone = Some(mono.as_ref().is_some_and(|m| m.pass));
    rep.c_tilde = mono.as_ref().map(|m| m.c_tilde);
    let mut pass = mono.as_ref().is_some_and(|m| m.pass && m.c_tilde <= tol.c_tilde);

    let opts = ClassifyOptions {
        r_max: spec.r_max,
        n_radii: spec.n_radii,
        ..Default::default()
    };
    let cls = match classify_points(u, set, &[x], &opts) {
        Ok(mut v) => v.remove(0),
        Err(e) => {
            rep.error = Some(e.to_string());
            return Ok(rep);
        }
    };
    rep.n0 = Some(cls.n0);
    rep.class = Some(cls.classification);
    rep.branch_count = Some(cls.branch_count);
    if on_set {
        match cls.classification {
            Classification::Regular => {
                pass &= (cls.n0 - 1.0).abs() <= tol.n0 && cls.branch_count == 2;
                match reflection_check(u, set, x, 3.0 * h) {
                    Ok(r) => {
                        rep.reflection_mismatch = Some(r.mismatch);
                        pass &= r.mismatch <= tol.reflection_mismatch;
                    }
                    Err(e) => rep.reflection_error = Some(e.to_string()),
                }
            }
            Classification::Singular => {
                let dev = equal_angle_check(&cls);
                rep.angle_deviation = Some(dev);
                pass &= cls.n0 >= 1.5 - tol.n0 && cls.branch_count >= 3 && dev.to_degrees() <= tol.angle_deg;
            }
        }
    }
    rep.pass = Some(pass);
    Ok(rep)
}

/// Runs the diagnostics and writes `diagnose/report.json`,
/// `diagnose/nodal.geojson` and one profile per checked center.
pub fn analyze(ctx: &mut Ctx, u: &SegregatedConfig, spec: &AnalysisSpec) -> CliResult<StageOutput<DiagnoseReport>> {
    let set = match extract_nodal_set(u, 0.0) {
        Ok(s) => s,
        Err(Error::EmptyNodalSet) => {
            let report = DiagnoseReport {
                notice: Some("EmptyNodalSet".into()),
                singular_candidates: Vec::new(),
                centers: Vec::new(),
            };
            ctx.write_json("diagnose/report.json", &report)?;
            let summary = serde_json::json!({ "notice": "EmptyNodalSet", "centers": 0 });
            return Ok(StageOutput::new(true, summary, report));
        }
        Err(e) => return Err(e).staged(),
    };
    ctx.write_json("diagnose/nodal.geojson", &set.to_geojson())?;
    let mut reports = Vec::new();
    for (k, x) in centers(u, &set, spec).into_iter().enumerate() {
        reports.push(check_center(ctx, u, &set, spec, k, x)?);
    }
    let checked = reports.iter().filter(|r| r.pass.is_some()).count();
    let failed = reports.iter().filter(|r| r.pass == Some(false)).count();
    let errors = reports.iter().filter(|r| r.error.is_some()).count();
    let singular = reports
        .iter()
        .filter(|r| r.class == Some(Classification::Singular) && r.on_nodal_set)
        .count();
    let report = DiagnoseReport {
        notice: None,
        singular_candidates: set.singular_candidates.clone(),
        centers: reports,
    };
    ctx.write_json("diagnose/report.json", &report)?;
    let summary = serde_json::json!({
        "centers": report.centers.len(),
        "checked": checked,
        "failed": failed,
        "errors": errors,
        "singular": singular,
    });
    Ok(StageOutput::new(failed == 0, summary, report))
}

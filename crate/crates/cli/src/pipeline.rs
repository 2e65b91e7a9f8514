//! Stage sequences for each experiment kind.

use serde_json::json;

use seglab::almgren::{ReactionSpec, SegregatedConfig};
use seglab::blowup::{
    classify_trace, frame_differences, homogeneity_residual, make_frame, spherical_trace, write_frame,
};
use seglab::grid::io::{read_field, write_field, FieldFormat};
use seglab::grid::Grid2D;
use seglab::partition::{interface_scales, optimize_partition, partition_to_config, Domain};
use seglab::solver::{
    beta_continuation, default_assignment, make_prototype_at, planar_traces, BoundarySpec, Competition,
    CompetitionParams, Init, SolveOptions,
};
use seglab::Error;

use crate::analysis::analyze;
use crate::config::{
    AnalysisSpec, BlowupBlock, DiagnoseBlock, DomainSpec, ExperimentConfig, GridSpec, Kind, PartitionBlock, PrototypeBlock,
    TraceSpec,
};
use crate::error::CliResult;
use crate::report::{Ctx, StageOutput, StageResultExt};
use crate::validate::validate_suite;

pub fn boundary(grid: &Grid2D, trace: &TraceSpec) -> seglab::Result<BoundarySpec> {
    match trace {
        TraceSpec::Planar { amplitude } => planar_traces(grid, *amplitude),
        TraceSpec::Sectors {
            m,
            amplitude,
            center,
            assignment,
        } => {
            let a = assignment.clone().unwrap_or_else(|| default_assignment(*m));
            let proto = make_prototype_at(*m, *grid, &a, *center)?;
            let traces: Vec<Vec<f64>> = proto
                .components()
                .iter()
                .map(|c| c.values().iter().map(|v| v * amplitude).collect())
                .collect();
            let bc = BoundarySpec::Trace(traces);
            bc.validate(grid, proto.h_components())?;
            Ok(bc)
        }
    }
}

fn write_components(ctx: &mut Ctx, u: &SegregatedConfig, stem: &str, meta: serde_json::Value) -> CliResult<()> {
    for (i, c) in u.components().iter().enumerate() {
        let mut m = meta.as_object().cloned().unwrap_or_default();
        m.insert("component".into(), json!(i));
        let path = ctx.path(&format!("{stem}_u{i}.csv"))?;
        let written = write_field(c, &path, FieldFormat::Csv, m).staged()?;
        ctx.add(written);
    }
    Ok(())
}

/// `∫ Σ_{i<j} u_i^2 u_j^2` for GP, `∫ Σ_{i<j} u_i u_j` for LV, strictly
/// decreasing along the ladder.
fn competition(
    ctx: &mut Ctx,
    grid: Grid2D,
    trace: &TraceSpec,
    ladder: &[f64],
    opts: &SolveOptions,
    problem: impl FnOnce(usize) -> seglab::Result<Competition>,
) -> CliResult<SegregatedConfig> {
    ctx.stage("solve", |ctx| {
        let bc = boundary(&grid, trace).staged()?;
        let problem = problem(crate::config::trace_components(trace)?).staged()?;
        let stages = beta_continuation(&problem, &bc, grid, &Init::Harmonic, ladder, opts).staged()?;
        let mut reports = Vec::new();
        for (k, (u, rep)) in stages.iter().enumerate() {
            write_components(ctx, u, &format!("fields/beta{k}"), json!({ "beta": rep.beta }))?;
            reports.push(rep.clone());
        }
        ctx.write_json("solve_reports.json", &reports)?;
        let overlap: Vec<f64> = reports.iter().map(|r| r.interaction).collect();
        let decreasing = overlap.windows(2).all(|w| w[1] < w[0]);
        let u = stages.into_iter().last().map(|(u, _)| u).expect("nonempty ladder");
        let summary = json!({
            "overlap": overlap,
            "overlap_decreasing": decreasing,
            "eps_seg": u.eps_seg(),
            "residuals": reports.iter().map(|r| r.residual).collect::<Vec<_>>(),
        });
        Ok(StageOutput::new(decreasing, summary, u))
    })
}

fn prototype(ctx: &mut Ctx, grid: Grid2D, b: &PrototypeBlock) -> CliResult<SegregatedConfig> {
    ctx.stage("prototype", |ctx| {
        let a = b.assignment.clone().unwrap_or_else(|| default_assignment(b.m));
        let u = make_prototype_at(b.m, grid, &a, b.center).staged()?;
        write_components(ctx, &u, "fields/prototype", json!({ "m": b.m }))?;
        let summary = json!({ "m": b.m, "components": u.h_components() });
        Ok(StageOutput::new(true, summary, u))
    })
}

fn partition(ctx: &mut Ctx, grid: Grid2D, b: &PartitionBlock, seed: u64, chained: bool) -> CliResult<Option<SegregatedConfig>> {
    ctx.stage("partition", |ctx| {
        let domain = match b.domain {
            DomainSpec::Rectangle => Domain::rectangle(grid),
            DomainSpec::Disk { center, radius } => Domain::disk(grid, center, radius),
        };
        let part = optimize_partition(b.parts, b.p, &domain, &b.options, seed).staged()?;
        let scales = interface_scales(&part).staged()?;
        let dir = ctx.path("partition/labels.csv")?;
        let written = part.write(dir.parent().unwrap(), &scales).staged()?;
        ctx.add(written);
        let summary = json!({
            "objective": part.objective,
            "eigenvalues": part.eigenvalues,
            "relaxed_eigenvalues": part.relaxed_eigenvalues,
            "scales": scales,
            "seed": part.seed,
            "failed_seeds": part.failed_seeds,
        });
        let u = if chained {
            let u = partition_to_config(&part).staged()?;
            write_components(ctx, &u, "fields/partition", json!({}))?;
            Some(u)
        } else {
            None
        };
        Ok(StageOutput::new(true, summary, u))
    })
}

fn load(ctx: &mut Ctx, b: &DiagnoseBlock) -> CliResult<SegregatedConfig> {
    ctx.stage("load", |_| {
        let mut fields: Vec<seglab::grid::ScalarField> = Vec::new();
        for path in &b.fields {
            let (f, _) = read_field(path).staged()?;
            if let Some(first) = fields.first() {
                if first.grid() != f.grid() {
                    return Err(Error::HeaderMismatch(format!(
                        "{} lives on another grid than {}",
                        path.display(),
                        b.fields[0].display()
                    )))
                    .staged();
                }
            }
            fields.push(f);
        }
        let reaction = match &b.reaction {
            Some(r) => ReactionSpec::new(r.clone()).staged()?,
            None => ReactionSpec::zero(fields.len()),
        };
        let u = SegregatedConfig::with_measured_overlap(fields, reaction).staged()?;
        let g = *u.grid();
        let summary = json!({
            "components": u.h_components(),
            "nx": g.nx(),
            "ny": g.ny(),
            "h": g.h(),
            "eps_seg": u.eps_seg(),
        });
        Ok(StageOutput::new(true, summary, u))
    })
}

fn blowup(ctx: &mut Ctx, grid: Grid2D, b: &BlowupBlock) -> CliResult<()> {
    let u = prototype(
        ctx,
        grid,
        &PrototypeBlock {
            m: b.m,
            center: b.center,
            assignment: b.assignment.clone(),
        },
    )?;
    ctx.stage("blowup", |ctx| {
        let tol = ctx.tol;
        let mut frames = Vec::new();
        let mut rows = Vec::new();
        let mut pass = true;
        for (k, &t) in b.scales.iter().enumerate() {
            let frame = make_frame(&u, b.x0, t).staged()?;
            let dir = ctx.out.join("frames");
            std::fs::create_dir_all(&dir)?;
            let written = write_frame(&frame, &dir, &format!("t{k}"), FieldFormat::Csv).staged()?;
            ctx.add(written);
            let trace = spherical_trace(&frame, b.trace_radius, b.n_angles).staged()?;
            let cls = classify_trace(&trace).staged()?;
            let homogeneity = homogeneity_residual(&frame).staged()?;
            pass &= cls.consensus && (cls.min_alpha - frame.alpha).abs() <= tol.n0;
            rows.push(json!({
                "t": t,
                "rho": frame.rho,
                "alpha": frame.alpha,
                "homogeneity_residual": homogeneity,
                "trace": cls,
            }));
            frames.push(frame);
        }
        let diffs = frame_differences(&frames).staged()?;
        let report = json!({ "x0": b.x0, "frames": rows, "frame_differences": diffs });
        ctx.write_json("blowup.json", &report)?;
        let summary = json!({
            "alphas": frames.iter().map(|f| f.alpha).collect::<Vec<_>>(),
            "frame_differences": diffs,
        });
        Ok(StageOutput::new(pass, summary, ()))
    })
}

fn diagnose_stage(ctx: &mut Ctx, u: &SegregatedConfig, spec: &AnalysisSpec) -> CliResult<()> {
    ctx.stage("diagnose", |ctx| {
        let out = analyze(ctx, u, spec)?;
        Ok(StageOutput::new(out.pass, out.summary, ()))
    })
}

/// Executes the stages of `cfg` into `out`. Returns the written report;
/// a failing stage ends the run early but still leaves `report.json`.
pub fn execute(cfg: &ExperimentConfig, mut ctx: Ctx) -> CliResult<crate::RunOutcome> {
    let result = run_stages(cfg, &mut ctx);
    let report = ctx.finish()?;
    Ok(crate::RunOutcome {
        report,
        failure: result.err(),
    })
}

fn run_stages(cfg: &ExperimentConfig, ctx: &mut Ctx) -> CliResult<()> {
    let grid = cfg.grid.as_ref().map(GridSpec::build).transpose()?;
    let seed = ctx.report.seed;
    let u = match cfg.kind {
        Kind::Gp => {
            let b = cfg.gp.as_ref().unwrap();
            Some(competition(ctx, grid.unwrap(), &b.trace, &b.beta_ladder, &b.solve, |n| {
                Ok(Competition::Gp(CompetitionParams::uniform(n, b.lambda, b.omega, b.beta_ladder[0])))
            })?)
        }
        Kind::Lv => {
            let b = cfg.lv.as_ref().unwrap();
            Some(competition(ctx, grid.unwrap(), &b.trace, &b.beta_ladder, &b.solve, |_| {
                Ok(Competition::Lv {
                    reaction: ReactionSpec::new(b.reaction.clone())?,
                    beta: b.beta_ladder[0],
                })
            })?)
        }
        Kind::Prototype => Some(prototype(ctx, grid.unwrap(), cfg.prototype.as_ref().unwrap())?),
        Kind::Partition => partition(ctx, grid.unwrap(), cfg.partition.as_ref().unwrap(), seed, cfg.analysis.is_some())?,
        Kind::Diagnose => {
            let u = load(ctx, cfg.diagnose.as_ref().unwrap())?;
            diagnose_stage(ctx, &u, &cfg.analysis.clone().unwrap_or_default())?;
            None
        }
        Kind::Blowup => {
            blowup(ctx, grid.unwrap(), cfg.blowup.as_ref().unwrap())?;
            None
        }
        Kind::Validate => {
            validate_suite(ctx, &cfg.validate.clone().unwrap_or_default())?;
            None
        }
    };
    if let (Some(u), Some(spec)) = (u, &cfg.analysis) {
        diagnose_stage(ctx, &u, spec)?;
    }
    Ok(())
}

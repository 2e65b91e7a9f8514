//! Competition systems driven to steady state by semi-implicit relaxation,
//! β-continuation, closed-form prototypes and the class-S inequalities.
//!
//! Each step solves, for every component independently (Jacobi across
//! components, so relabeling the input relabels the output exactly),
//!
//! `(1/Δt - Δ_h + q⁻(u_i) + c_i(U)) u_i' = u_i / Δt + q⁺(u_i) u_i`
//!
//! where `q = f_i(s)/s` is split into its positive and negative parts and
//! `c_i` is the competition coefficient: `β Σ_j β_ij u_j^2` for the
//! Gross–Pitaevskii system and `β Σ_{j≠i} u_j` for Lotka–Volterra.

mod class_s;
mod prototype;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::almgren::{Reaction, ReactionSpec, SegregatedConfig};
use crate::error::{Error, Result};
use crate::grid::{Grid2D, Point, ScalarField};
use crate::linsolve::ShiftedLaplacian;

pub use class_s::{class_s_check, class_s_check_away_from, class_s_tolerance, ClassSReport};
pub use prototype::{default_assignment, make_prototype, make_prototype_at, sector_of};

/// Parameters of `-Δu_i + λ_i u_i = ω_i u_i^3 - β u_i Σ_j β_ij u_j^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompetitionParams {
    pub lambda: Vec<f64>,
    pub omega: Vec<f64>,
    pub beta: f64,
    /// Symmetric, zero diagonal, positive off the diagonal.
    pub beta_ij: Vec<Vec<f64>>,
}

impl CompetitionParams {
    /// `h` components with `β_ij = 1` off the diagonal.
    pub fn uniform(h: usize, lambda: f64, omega: f64, beta: f64) -> Self {
        Self {
            lambda: vec![lambda; h],
            omega: vec![omega; h],
            beta,
            beta_ij: (0..h)
                .map(|i| (0..h).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
                .collect(),
        }
    }

    pub fn h(&self) -> usize {
        self.lambda.len()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.h();
        if h == 0 || self.omega.len() != h || self.beta_ij.len() != h {
            return Err(Error::InvalidParams("lambda, omega and beta_ij sizes differ".into()));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParams(format!("beta must be >= 0, got {}", self.beta)));
        }
        for i in 0..h {
            if self.beta_ij[i].len() != h {
                return Err(Error::InvalidParams("beta_ij must be square".into()));
            }
            if self.beta_ij[i][i] != 0.0 {
                return Err(Error::InvalidParams("beta_ij must have a zero diagonal".into()));
            }
            for j in 0..h {
                let b = self.beta_ij[i][j];
                if b != self.beta_ij[j][i] {
                    return Err(Error::InvalidParams(format!("beta_ij not symmetric at ({i}, {j})")));
                }
                if i != j && !(b.is_finite() && b > 0.0) {
                    return Err(Error::InvalidParams(format!("beta_ij[{i}][{j}] must be > 0")));
                }
            }
            if !(self.lambda[i].is_finite() && self.omega[i].is_finite()) {
                return Err(Error::InvalidParams("non-finite lambda or omega".into()));
            }
        }
        Ok(())
    }

    pub fn reaction(&self) -> ReactionSpec {
        ReactionSpec::new(
            self.lambda
                .iter()
                .zip(&self.omega)
                .map(|(&lambda, &omega)| Reaction::Cubic { omega, lambda })
                .collect(),
        )
        .expect("validated parameters")
    }
}

/// Boundary data: homogeneous Dirichlet or per-component traces.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySpec {
    ZeroDirichlet,
    /// Full-grid vectors; only boundary entries are read.
    Trace(Vec<Vec<f64>>),
}

impl BoundarySpec {
    /// Samples `phi(component, point)` on the boundary nodes.
    pub fn trace_from_fn(grid: &Grid2D, h: usize, phi: impl Fn(usize, Point) -> f64) -> Result<Self> {
        let mut traces = vec![vec![0.0; grid.len()]; h];
        for (c, t) in traces.iter_mut().enumerate() {
            for (k, v) in t.iter_mut().enumerate() {
                let (i, j) = grid.ij(k);
                if grid.is_boundary(i, j) {
                    *v = phi(c, grid.coords_of(k));
                }
            }
        }
        let bc = Self::Trace(traces);
        bc.validate(grid, h)?;
        Ok(bc)
    }

    pub fn validate(&self, grid: &Grid2D, h: usize) -> Result<()> {
        let Self::Trace(traces) = self else {
            return Ok(());
        };
        if traces.len() != h || traces.iter().any(|t| t.len() != grid.len()) {
            return Err(Error::InvalidParams("trace shape does not match the problem".into()));
        }
        for k in 0..grid.len() {
            let (i, j) = grid.ij(k);
            if !grid.is_boundary(i, j) {
                continue;
            }
            let mut positive = 0;
            for t in traces {
                if !(t[k].is_finite() && t[k] >= 0.0) {
                    return Err(Error::InvalidParams(format!("trace negative at node {k}")));
                }
                positive += usize::from(t[k] > 0.0);
            }
            if positive > 1 {
                return Err(Error::InvalidParams(format!(
                    "trace supports overlap at boundary node ({i}, {j})"
                )));
            }
        }
        Ok(())
    }

    fn value(&self, c: usize, k: usize) -> f64 {
        match self {
            Self::ZeroDirichlet => 0.0,
            Self::Trace(t) => t[c][k],
        }
    }

    fn sup(&self) -> f64 {
        match self {
            Self::ZeroDirichlet => 0.0,
            Self::Trace(t) => t.iter().flatten().fold(0.0, |m, &v| f64::max(m, v)),
        }
    }
}

/// Which competition system to relax.
#[derive(Debug, Clone, PartialEq)]
pub enum Competition {
    Gp(CompetitionParams),
    Lv { reaction: ReactionSpec, beta: f64 },
}

impl Competition {
    pub fn h(&self) -> usize {
        match self {
            Self::Gp(p) => p.h(),
            Self::Lv { reaction, .. } => reaction.len(),
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            Self::Gp(p) => p.beta,
            Self::Lv { beta, .. } => *beta,
        }
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        match self {
            Self::Gp(p) => Self::Gp(CompetitionParams { beta, ..p.clone() }),
            Self::Lv { reaction, .. } => Self::Lv {
                reaction: reaction.clone(),
                beta,
            },
        }
    }

    pub fn reaction(&self) -> ReactionSpec {
        match self {
            Self::Gp(p) => p.reaction(),
            Self::Lv { reaction, .. } => reaction.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Gp(p) => p.validate(),
            Self::Lv { reaction, beta } => {
                if reaction.is_empty() {
                    return Err(Error::InvalidParams("no components".into()));
                }
                if !(beta.is_finite() && *beta >= 0.0) {
                    return Err(Error::InvalidParams(format!("beta must be >= 0, got {beta}")));
                }
                Ok(())
            }
        }
    }

    /// Competition coefficient `c_i` at node `k`.
    #[inline]
    fn coupling(&self, u: &[Vec<f64>], i: usize, k: usize) -> f64 {
        match self {
            Self::Gp(p) => {
                let mut s = 0.0;
                for (j, uj) in u.iter().enumerate() {
                    if j != i {
                        s += p.beta_ij[i][j] * uj[k] * uj[k];
                    }
                }
                p.beta * s
            }
            Self::Lv { beta, .. } => {
                let mut s = 0.0;
                for (j, uj) in u.iter().enumerate() {
                    if j != i {
                        s += uj[k];
                    }
                }
                beta * s
            }
        }
    }
}

/// Initial state of a relaxation.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Discrete harmonic extension of each trace.
    Harmonic,
    /// Harmonic extension plus uniform noise of the given relative amplitude.
    Random { seed: u64, amplitude: f64 },
    Fields(Vec<ScalarField>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    /// Stop when the relative steady defect drops below this.
    pub tol: f64,
    pub max_iters: usize,
    pub dt0: f64,
    pub dt_max: f64,
    pub linear_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 20_000,
            dt0: 1e-3,
            dt_max: 1e8,
            linear_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub beta: f64,
    /// `max |defect| / max(|Δu| + |f(u)| + |c u|, sup U / L^2)` over interior
    /// nodes, `L` the larger grid side.
    pub residual: f64,
    pub iterations: usize,
    pub rejected_steps: usize,
    /// GP: `∫ Σ_{i<j} u_i^2 u_j^2`; LV: `∫ Σ_{i<j} u_i u_j`.
    pub interaction: f64,
    /// The same sum weighted by `β β_ij` (GP) or `β` (LV).
    pub penalty: f64,
    /// `J_β` for GP, absent for LV (no variational structure).
    pub energy: Option<f64>,
    /// Mass removed by clipping negative values, `h^2 Σ max(-u, 0)`.
    pub clipped_mass: f64,
    pub final_dt: f64,
}

/// Time steps solve their linear systems only to the accuracy the current
/// defect warrants: the relative residual must fall below
/// `DEFECT_FRACTION * defect` or drop by `LINEAR_REDUCTION`, whichever is
/// stricter, and never needs to go below `linear_tol`.
const DEFECT_FRACTION: f64 = 1e-3;
const LINEAR_REDUCTION: f64 = 1e-2;

struct Engine<'a> {
    grid: Grid2D,
    problem: &'a Competition,
    reaction: ReactionSpec,
    bc: &'a BoundarySpec,
    interior: Vec<bool>,
}

impl<'a> Engine<'a> {
    fn new(grid: Grid2D, problem: &'a Competition, bc: &'a BoundarySpec) -> Self {
        let interior = (0..grid.len())
            .map(|k| {
                let (i, j) = grid.ij(k);
                !grid.is_boundary(i, j)
            })
            .collect();
        Self {
            grid,
            problem,
            reaction: problem.reaction(),
            bc,
            interior,
        }
    }

    fn harmonic(&self, opts: &SolveOptions) -> Result<Vec<Vec<f64>>> {
        let n = self.grid.len();
        let op = ShiftedLaplacian::new(self.grid, &self.interior, &vec![0.0; n], None)?;
        (0..self.problem.h())
            .map(|c| {
                let mut u: Vec<f64> = (0..n).map(|k| self.bc.value(c, k)).collect();
                let mut b = vec![0.0; n];
                op.add_dirichlet(&u, &mut b);
                op.solve(&b, &mut u, opts.linear_tol, 1000)?;
                for v in &mut u {
                    *v = v.max(0.0);
                }
                Ok(u)
            })
            .collect()
    }

    /// Relative steady defect of `-Δu_i - f_i(u_i) + c_i u_i = 0`. The scale
    /// is the largest term magnitude, floored by `sup U / L^2` with `L` the
    /// larger side of the grid so that harmonic states do not divide by zero.
    fn defect(&self, u: &[Vec<f64>]) -> f64 {
        let g = self.grid;
        let (nx, h2) = (g.nx(), g.h() * g.h());
        let side = g.extent()[0].max(g.extent()[1]);
        let sup = u.iter().flatten().fold(0.0_f64, |m, &v| m.max(v));
        let (mut worst, mut scale) = (0.0_f64, sup / (side * side));
        for (i, ui) in u.iter().enumerate() {
            let f = self.reaction.get(i);
            for k in (0..g.len()).filter(|&k| self.interior[k]) {
                let lap = (ui[k + 1] + ui[k - 1] + ui[k + nx] + ui[k - nx] - 4.0 * ui[k]) / h2;
                let fk = f.value(ui[k]);
                let ck = self.problem.coupling(u, i, k) * ui[k];
                worst = worst.max((-lap - fk + ck).abs());
                scale = scale.max(lap.abs() + fk.abs() + ck.abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// `J_β`, or `None` for Lotka–Volterra.
    fn energy(&self, u: &[Vec<f64>]) -> Option<f64> {
        let Competition::Gp(p) = self.problem else {
            return None;
        };
        let g = self.grid;
        let (nx, ny, h2) = (g.nx(), g.ny(), g.h() * g.h());
        let mut dirichlet = 0.0;
        let mut potential = 0.0;
        for (i, ui) in u.iter().enumerate() {
            for j in 0..ny {
                for a in 0..nx {
                    let k = j * nx + a;
                    if a + 1 < nx {
                        let d = ui[k + 1] - ui[k];
                        dirichlet += d * d;
                    }
                    if j + 1 < ny {
                        let d = ui[k + nx] - ui[k];
                        dirichlet += d * d;
                    }
                    if self.interior[k] {
                        let s2 = ui[k] * ui[k];
                        potential += (0.5 * p.lambda[i] - 0.25 * p.omega[i] * s2) * s2 * h2;
                    }
                }
            }
        }
        let penalty = self.interaction(u).1;
        Some(0.5 * dirichlet + potential + 0.5 * penalty)
    }

    /// Unweighted and weighted interaction integrals.
    fn interaction(&self, u: &[Vec<f64>]) -> (f64, f64) {
        let h2 = self.grid.h() * self.grid.h();
        let (mut plain, mut weighted) = (0.0, 0.0);
        for i in 0..u.len() {
            for j in i + 1..u.len() {
                let s: f64 = match self.problem {
                    Competition::Gp(_) => u[i].iter().zip(&u[j]).map(|(a, b)| a * a * b * b).sum(),
                    Competition::Lv { .. } => u[i].iter().zip(&u[j]).map(|(a, b)| a * b).sum(),
                };
                let w = match self.problem {
                    Competition::Gp(p) => p.beta * p.beta_ij[i][j],
                    Competition::Lv { beta, .. } => *beta,
                };
                plain += s * h2;
                weighted += w * s * h2;
            }
        }
        (plain, weighted)
    }

    fn step(&self, u: &[Vec<f64>], dt: f64, defect: f64, opts: &SolveOptions) -> Result<(Vec<Vec<f64>>, f64)> {
        let n = self.grid.len();
        let h2 = self.grid.h() * self.grid.h();
        let results: Vec<Result<(Vec<f64>, f64)>> = (0..u.len())
            .into_par_iter()
            .map(|i| {
                let f = self.reaction.get(i);
                let mut sigma = vec![0.0; n];
                let mut b = vec![0.0; n];
                for k in (0..n).filter(|&k| self.interior[k]) {
                    let q = f.ratio(u[i][k]);
                    sigma[k] = 1.0 / dt + (-q).max(0.0) + self.problem.coupling(u, i, k);
                    b[k] = u[i][k] / dt + q.max(0.0) * u[i][k];
                }
                let op = ShiftedLaplacian::new(self.grid, &self.interior, &sigma, None)?;
                let mut next = u[i].clone();
                op.add_dirichlet(&next, &mut b);
                op.solve_with(
                    &b,
                    &mut next,
                    |rel0| (DEFECT_FRACTION * defect).min(LINEAR_REDUCTION * rel0).max(opts.linear_tol),
                    500,
                )?;
                let mut clipped = 0.0;
                for v in &mut next {
                    if *v < 0.0 {
                        clipped -= *v;
                        *v = 0.0;
                    }
                }
                Ok((next, clipped * h2))
            })
            .collect();
        let mut out = Vec::with_capacity(u.len());
        let mut clipped = 0.0;
        for r in results {
            let (v, c) = r?;
            out.push(v);
            clipped += c;
        }
        Ok((out, clipped))
    }

    fn run(&self, init: &Init, opts: &SolveOptions) -> Result<(Vec<Vec<f64>>, SolveReport)> {
        let n = self.grid.len();
        let h = self.problem.h();
        let mut u = match init {
            Init::Harmonic => self.harmonic(opts)?,
            Init::Random { seed, amplitude } => {
                let mut u = self.harmonic(opts)?;
                let scale = amplitude * self.bc.sup().max(1.0);
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                for ui in &mut u {
                    for k in 0..n {
                        let r: f64 = rng.gen();
                        if self.interior[k] {
                            ui[k] += scale * r;
                        }
                    }
                }
                u
            }
            Init::Fields(f) => {
                if f.len() != h || f.iter().any(|c| *c.grid() != self.grid) {
                    return Err(Error::InvalidParams("initial fields do not match the problem".into()));
                }
                f.iter()
                    .enumerate()
                    .map(|(c, field)| {
                        (0..n)
                            .map(|k| {
                                if self.interior[k] {
                                    field.values()[k].max(0.0)
                                } else {
                                    self.bc.value(c, k)
                                }
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        let sup = |u: &[Vec<f64>]| u.iter().flatten().fold(0.0_f64, |m, &v| m.max(v));
        let limit = 10.0 * sup(&u).max(self.bc.sup());
        let mut energy = self.energy(&u);
        let mut residual = self.defect(&u);
        let mut dt = opts.dt0;
        let mut iterations = 0;
        let mut rejected = 0;
        let mut clipped_mass = 0.0;
        while residual > opts.tol {
            if iterations >= opts.max_iters {
                return Err(Error::NoConvergence {
                    iterations,
                    residual,
                });
            }
            iterations += 1;
            let (next, clipped) = self.step(&u, dt, residual, opts)?;
            let s = sup(&next);
            if limit > 0.0 && s > limit {
                return Err(Error::Blowup { sup: s, limit });
            }
            let next_energy = self.energy(&next);
            if let (Some(old), Some(new)) = (energy, next_energy) {
                if new > old + 1e-10 * old.abs() {
                    rejected += 1;
                    dt *= 0.5;
                    if dt < 1e-14 {
                        return Err(Error::NoConvergence {
                            iterations,
                            residual,
                        });
                    }
                    continue;
                }
            }
            let next_residual = self.defect(&next);
            if energy.is_none() && next_residual > residual {
                dt *= 0.5;
            } else {
                dt = (dt * 1.5).min(opts.dt_max);
            }
            u = next;
            energy = next_energy;
            residual = next_residual;
            clipped_mass += clipped;
        }
        let (interaction, penalty) = self.interaction(&u);
        Ok((
            u,
            SolveReport {
                beta: self.problem.beta(),
                residual,
                iterations,
                rejected_steps: rejected,
                interaction,
                penalty,
                energy,
                clipped_mass,
                final_dt: dt,
            },
        ))
    }
}

/// Relaxes `problem` to a steady state.
pub fn solve(
    problem: &Competition,
    bc: &BoundarySpec,
    grid: Grid2D,
    init: &Init,
    opts: &SolveOptions,
) -> Result<(SegregatedConfig, SolveReport)> {
    problem.validate()?;
    bc.validate(&grid, problem.h())?;
    if let (Competition::Gp(p), BoundarySpec::ZeroDirichlet) = (problem, bc) {
        if p.omega.iter().zip(&p.lambda).any(|(&w, &l)| w <= 0.0 && l >= 0.0) {
            return Err(Error::InvalidParams(
                "zero Dirichlet data with omega <= 0 and lambda >= 0 only admits the trivial state"
                    .into(),
            ));
        }
    }
    let engine = Engine::new(grid, problem, bc);
    let (u, report) = engine.run(init, opts)?;
    let components = u
        .into_iter()
        .map(|v| ScalarField::new(grid, v))
        .collect::<Result<Vec<_>>>()?;
    let config = SegregatedConfig::with_measured_overlap(components, problem.reaction())?;
    Ok((config, report))
}

/// Gross–Pitaevskii competition system.
pub fn solve_gp(
    params: &CompetitionParams,
    bc: &BoundarySpec,
    grid: Grid2D,
    init: &Init,
    opts: &SolveOptions,
) -> Result<(SegregatedConfig, SolveReport)> {
    solve(&Competition::Gp(params.clone()), bc, grid, init, opts)
}

/// Lotka–Volterra competition system with trace data.
pub fn solve_lv(
    reaction: &ReactionSpec,
    beta: f64,
    bc: &BoundarySpec,
    grid: Grid2D,
    init: &Init,
    opts: &SolveOptions,
) -> Result<(SegregatedConfig, SolveReport)> {
    if matches!(bc, BoundarySpec::ZeroDirichlet) {
        return Err(Error::InvalidParams("Lotka-Volterra runs need trace data".into()));
    }
    let problem = Competition::Lv {
        reaction: reaction.clone(),
        beta,
    };
    solve(&problem, bc, grid, init, opts)
}

/// Solves along an increasing β ladder, warm-starting each stage from the
/// previous one.
pub fn beta_continuation(
    problem: &Competition,
    bc: &BoundarySpec,
    grid: Grid2D,
    init: &Init,
    ladder: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<(SegregatedConfig, SolveReport)>> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("beta ladder must be nonempty and increasing".into()));
    }
    let mut out: Vec<(SegregatedConfig, SolveReport)> = Vec::with_capacity(ladder.len());
    for &beta in ladder {
        let start = match out.last() {
            Some((c, _)) => Init::Fields(c.components().to_vec()),
            None => init.clone(),
        };
        let stage = solve(&problem.with_beta(beta), bc, grid, &start, opts).map_err(|e| {
            Error::Continuation {
                beta,
                source: Box::new(e),
            }
        })?;
        out.push(stage);
    }
    Ok(out)
}

/// Traces `A (1 - 2x)^+` and `A (2x - 1)^+` on the unit square: two
/// components meeting along `x = 1/2`.
pub fn planar_traces(grid: &Grid2D, amplitude: f64) -> Result<BoundarySpec> {
    BoundarySpec::trace_from_fn(grid, 2, |c, p| {
        let s = 1.0 - 2.0 * p[0];
        amplitude * if c == 0 { s.max(0.0) } else { (-s).max(0.0) }
    })
}

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{l2_norm, lambda1, p_mean, rayleigh, validate_p, Domain, Partition, MIN_REGION_NODES};
use crate::error::{Error, Result};
use crate::grid::{distance, ScalarField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionOptions {
    /// Penalty stages, increasing.
    pub beta_ladder: Vec<f64>,
    /// Starts with seeds `seed, seed + 1, ...`; the best objective is kept.
    pub n_starts: usize,
    pub max_sweeps: usize,
    /// Relative energy change that ends a stage.
    pub stage_tol: f64,
    /// Softmax temperature (relative to `max λ`) at the first and last stage
    /// for `p = ∞`, interpolated geometrically.
    pub temperature: (f64, f64),
    /// Smallest component weight; the penalty felt by component `i` is
    /// `β / w_i`.
    pub weight_floor: f64,
    /// Weights move this fraction of the way to their target each sweep.
    pub weight_relaxation: f64,
    pub linear_tol: f64,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self {
            beta_ladder: vec![1e2, 1e3, 1e4, 1e5, 1e6, 1e7],
            n_starts: 5,
            max_sweeps: 300,
            stage_tol: 1e-7,
            temperature: (0.1, 1e-2),
            weight_floor: 1e-2,
            weight_relaxation: 0.1,
            linear_tol: 1e-10,
        }
    }
}

/// One relaxation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub beta: f64,
    pub sweep: usize,
    /// `Σ w_i ∫|∇u_i|^2 + β Σ_{i<j} ∫u_i^2 u_j^2` with the sweep's weights.
    pub energy: f64,
    /// `p`-mean of the Dirichlet Rayleigh quotients.
    pub objective: f64,
}

/// Minimizes the `p`-mean of the first eigenvalues over `h`-partitions of
/// the domain (`p = ∞` for the max). Each start seeds a Voronoi
/// partition, then per penalty stage repeats sweeps of one inverse-power
/// step per component for `-Δ + (β / w_i) Σ_{j≠i} u_j^2`, with weights
/// `w_i = (λ_i / max λ)^{p-1}` or, for `p = ∞`, an annealed softmax of
/// `λ_i / max λ`. The hard partition is the argmax labeling; its
/// eigenvalues are recomputed with [`lambda1`] on each part.
pub fn optimize_partition(
    h: usize,
    p: f64,
    domain: &Domain,
    opts: &PartitionOptions,
    seed: u64,
) -> Result<Partition> {
    validate_p(p)?;
    if h == 0 {
        return Err(Error::InvalidParams("need at least one part".into()));
    }
    if opts.n_starts == 0 || opts.beta_ladder.is_empty() {
        return Err(Error::InvalidParams("need at least one start and one penalty".into()));
    }
    if opts.beta_ladder.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
        return Err(Error::InvalidParams(format!("bad penalty ladder {:?}", opts.beta_ladder)));
    }
    if domain.node_count() < h * MIN_REGION_NODES {
        return Err(Error::EmptyRegion(domain.node_count()));
    }
    if h == 1 {
        return whole_domain(p, domain, seed);
    }
    let runs: Vec<Result<Partition>> = (0..opts.n_starts as u64)
        .into_par_iter()
        .map(|k| single_start(h, p, domain, opts, seed.wrapping_add(k)))
        .collect();
    let mut failed = Vec::new();
    let mut best: Option<Partition> = None;
    let mut first_err = None;
    for (k, r) in runs.into_iter().enumerate() {
        match r {
            Ok(part) => {
                if best.as_ref().is_none_or(|b| part.objective < b.objective) {
                    best = Some(part);
                }
            }
            Err(e) => {
                failed.push(seed.wrapping_add(k as u64));
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some(mut b) => {
            b.failed_seeds = failed;
            Ok(b)
        }
        None => Err(first_err.expect("at least one start ran")),
    }
}

fn whole_domain(p: f64, domain: &Domain, seed: u64) -> Result<Partition> {
    let (l, phi) = lambda1(domain)?;
    let labels = domain.active().iter().map(|&a| usize::from(a)).collect();
    Ok(Partition {
        grid: *domain.grid(),
        labels,
        eigenvalues: vec![l],
        eigenfunctions: vec![phi.clone()],
        relaxed: vec![phi],
        relaxed_eigenvalues: vec![l],
        p,
        objective: l,
        seed,
        failed_seeds: Vec::new(),
        history: Vec::new(),
    })
}

fn weights(lambdas: &[f64], p: f64, temperature: f64, floor: f64) -> Vec<f64> {
    let top = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    lambdas
        .iter()
        .map(|&l| {
            let w = if p.is_infinite() {
                ((l - top) / (temperature * top)).exp()
            } else {
                (l / top).powf(p - 1.0)
            };
            w.max(floor)
        })
        .collect()
}

fn voronoi_start(h: usize, domain: &Domain, seed: u64) -> Result<Vec<Vec<f64>>> {
    let g = domain.grid();
    let nodes: Vec<usize> = (0..g.len()).filter(|&k| domain.active()[k]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites: Vec<_> = sample(&mut rng, nodes.len(), h)
        .into_iter()
        .map(|s| g.coords_of(nodes[s]))
        .collect();
    let mut u = vec![vec![0.0; g.len()]; h];
    for &k in &nodes {
        let p = g.coords_of(k);
        let owner = (0..h)
            .min_by(|&a, &b| distance(p, sites[a]).total_cmp(&distance(p, sites[b])))
            .unwrap();
        u[owner][k] = 1.0;
    }
    for (i, ui) in u.iter_mut().enumerate() {
        let n = l2_norm(g, ui);
        if n == 0.0 {
            return Err(Error::DegenerateSeed { seed, component: i });
        }
        ui.iter_mut().for_each(|v| *v /= n);
    }
    Ok(u)
}

fn single_start(h: usize, p: f64, domain: &Domain, opts: &PartitionOptions, seed: u64) -> Result<Partition> {
    relax(p, domain, opts, voronoi_start(h, domain, seed)?, seed)
}

/// One start of [`optimize_partition`] from given nonnegative components,
/// normalized here; `seed` is only recorded.
pub fn optimize_partition_from(
    p: f64,
    domain: &Domain,
    opts: &PartitionOptions,
    initial: &[ScalarField],
    seed: u64,
) -> Result<Partition> {
    validate_p(p)?;
    if initial.len() < 2 {
        return Err(Error::InvalidParams("need at least two initial components".into()));
    }
    let g = domain.grid();
    let mut u = Vec::with_capacity(initial.len());
    for (i, f) in initial.iter().enumerate() {
        if f.grid() != g {
            return Err(Error::InvalidParams(format!("initial component {i} lives on another grid")));
        }
        let v: Vec<f64> = f
            .values()
            .iter()
            .zip(domain.active())
            .map(|(&x, &a)| if a { x.max(0.0) } else { 0.0 })
            .collect();
        let n = l2_norm(g, &v);
        if n == 0.0 {
            return Err(Error::DegenerateSeed { seed, component: i });
        }
        u.push(v.into_iter().map(|x| x / n).collect());
    }
    relax(p, domain, opts, u, seed)
}

fn relax(p: f64, domain: &Domain, opts: &PartitionOptions, mut u: Vec<Vec<f64>>, seed: u64) -> Result<Partition> {
    let h = u.len();
    let g = *domain.grid();
    let n = g.len();
    let h2 = g.h() * g.h();
    let lap = domain.operator(&vec![0.0; n])?;
    let mut work = vec![0.0; n];
    let dirichlet = |u: &[Vec<f64>], work: &mut [f64]| -> Vec<f64> {
        u.iter().map(|ui| rayleigh(&lap, ui, work)).collect()
    };
    let mut lambdas = dirichlet(&u, &mut work);
    let mut history = Vec::new();
    let stages = opts.beta_ladder.len();
    let mut w = vec![1.0; h];
    for (s, &beta) in opts.beta_ladder.iter().enumerate() {
        let frac = if stages > 1 { s as f64 / (stages - 1) as f64 } else { 1.0 };
        let temperature = opts.temperature.0 * (opts.temperature.1 / opts.temperature.0).powf(frac);
        let mut prev = f64::INFINITY;
        for sweep in 0..opts.max_sweeps {
            let target = weights(&lambdas, p, temperature, opts.weight_floor);
            let eta = if s == 0 && sweep == 0 { 1.0 } else { opts.weight_relaxation };
            w = w.iter().zip(&target).map(|(a, b)| a + eta * (b - a)).collect();
            // largest eigenvalue first, so relabeling the input only relabels the output
            let mut order: Vec<usize> = (0..h).collect();
            order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]).then(a.cmp(&b)));
            for i in order {
                let sigma: Vec<f64> = (0..n)
                    .map(|k| {
                        let others: f64 = (0..h).filter(|&j| j != i).map(|j| u[j][k] * u[j][k]).sum();
                        beta / w[i] * others
                    })
                    .collect();
                let op = domain.operator(&sigma)?;
                let shift = rayleigh(&op, &u[i], &mut work);
                let mut y: Vec<f64> = u[i].iter().map(|v| v / shift).collect();
                op.solve(&u[i], &mut y, opts.linear_tol, 500)?;
                let norm = l2_norm(&g, &y);
                if !(norm.is_finite() && norm > 0.0) {
                    return Err(Error::DegenerateSeed { seed, component: i });
                }
                // clip roundoff negatives; the exact step is positive
                u[i] = y.iter().map(|v| (v / norm).max(0.0)).collect();
            }
            lambdas = dirichlet(&u, &mut work);
            let mut energy: f64 = lambdas.iter().zip(&w).map(|(l, wi)| l * wi).sum();
            for i in 0..h {
                for j in i + 1..h {
                    energy += beta * h2 * (0..n).map(|k| u[i][k] * u[i][k] * u[j][k] * u[j][k]).sum::<f64>();
                }
            }
            history.push(HistoryEntry {
                beta,
                sweep,
                energy,
                objective: p_mean(&lambdas, p),
            });
            if (prev - energy).abs() <= opts.stage_tol * energy {
                break;
            }
            prev = energy;
        }
        for (i, ui) in u.iter().enumerate() {
            let owned = (0..n)
                .filter(|&k| domain.active()[k] && (0..h).all(|j| j == i || ui[k] > u[j][k]))
                .count();
            if owned < MIN_REGION_NODES {
                return Err(Error::DegenerateSeed { seed, component: i });
            }
        }
    }

    let mut labels = vec![0; n];
    for k in 0..n {
        if !domain.active()[k] {
            continue;
        }
        let (best, val) = (0..h).map(|i| (i, u[i][k])).fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        if val > 0.0 {
            labels[k] = best + 1;
        }
    }
    let parts: Vec<(f64, ScalarField)> = (0..h)
        .map(|i| {
            let phi: Vec<f64> = (0..n)
                .map(|k| {
                    let other = (0..h).filter(|&j| j != i).map(|j| u[j][k]).fold(0.0, f64::max);
                    other - u[i][k]
                })
                .collect();
            lambda1(&domain.restrict(&phi))
        })
        .collect::<Result<_>>()?;
    let eigenvalues: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let objective = p_mean(&eigenvalues, p);
    Ok(Partition {
        grid: g,
        labels,
        eigenvalues,
        eigenfunctions: parts.into_iter().map(|p| p.1).collect(),
        relaxed: u.into_iter().map(|v| ScalarField::new(g, v)).collect::<Result<_>>()?,
        relaxed_eigenvalues: lambdas,
        p,
        objective,
        seed,
        failed_seeds: Vec::new(),
        history,
    })
}

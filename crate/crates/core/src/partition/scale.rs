use nalgebra::{DMatrix, SymmetricEigen};

use super::Partition;
use crate::almgren::{Reaction, ReactionSpec, SegregatedConfig};
use crate::error::Result;

/// Edges cut closer than this fraction of `h` to a node are skipped.
const MIN_CUT: f64 = 0.1;

/// One-sided slope of a part eigenfunction at an interface crossing:
/// quadratic through the crossing and two nodes on its side, linear if the
/// second node is not in the part.
fn slope(phi: &[f64], near: usize, far: Option<usize>, d: f64, h: f64) -> f64 {
    match far {
        Some(f) => {
            let (d1, d2) = (d, d + h);
            (phi[near] * d2 * d2 - phi[f] * d1 * d1) / (d1 * d2 * (d2 - d1))
        }
        None => phi[near] / d,
    }
}

/// Scales `a_i > 0` with `Σ a_i^2 = h` minimizing
/// `Σ (a_i ∂_n φ_i - a_j ∂_n φ_j)^2` over grid edges crossing an
/// interface between parts `i` and `j`. Parts without interfaces keep 1.
pub fn interface_scales(partition: &Partition) -> Result<Vec<f64>> {
    let g = partition.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let hp = partition.h();
    let labels = &partition.labels;
    let h = g.h();
    let mut rows: Vec<(usize, f64, usize, f64)> = Vec::new();
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let k = g.idx(i, j);
            let a = labels[k];
            if a == 0 {
                continue;
            }
            // east and north edges only, each edge once
            for step in [1, nx] {
                let q = k + step;
                let b = labels[q];
                if b == 0 || b == a {
                    continue;
                }
                let (pa, pb) = (a - 1, b - 1);
                let ua = partition.relaxed[pa].values();
                let ub = partition.relaxed[pb].values();
                let (wk, wq) = (ua[k] - ub[k], ua[q] - ub[q]);
                if !(wk > 0.0 && wq < 0.0) {
                    continue;
                }
                let t = wk / (wk - wq);
                if !(MIN_CUT..=1.0 - MIN_CUT).contains(&t) {
                    continue;
                }
                let behind = k.checked_sub(step).filter(|&f| labels[f] == a);
                let ahead = Some(q + step).filter(|&f| f < g.len() && labels[f] == b);
                let ga = slope(partition.eigenfunctions[pa].values(), k, behind, t * h, h);
                let gb = slope(partition.eigenfunctions[pb].values(), q, ahead, (1.0 - t) * h, h);
                rows.push((pa, ga, pb, gb));
            }
        }
    }
    let mut touched = vec![false; hp];
    for r in &rows {
        touched[r.0] = true;
        touched[r.2] = true;
    }
    let cols: Vec<usize> = (0..hp).filter(|&i| touched[i]).collect();
    let mut scales = vec![1.0; hp];
    if cols.len() < 2 {
        return Ok(scales);
    }
    let pos = |i: usize| cols.iter().position(|&c| c == i).unwrap();
    let m = cols.len();
    let mut normal = DMatrix::<f64>::zeros(m, m);
    for &(pa, ga, pb, gb) in &rows {
        let (x, y) = (pos(pa), pos(pb));
        normal[(x, x)] += ga * ga;
        normal[(y, y)] += gb * gb;
        normal[(x, y)] -= ga * gb;
        normal[(y, x)] -= ga * gb;
    }
    let eig = SymmetricEigen::new(normal);
    let low = eig.eigenvalues.imin();
    let v = eig.eigenvectors.column(low);
    let sign = if v.sum() < 0.0 { -1.0 } else { 1.0 };
    let norm = v.norm();
    for (c, &i) in cols.iter().enumerate() {
        scales[i] = sign * v[c] / norm * (m as f64).sqrt();
    }
    Ok(scales)
}

/// `(a_i φ_i)` with [`interface_scales`] and reactions `f_i(s) = λ_i s`.
pub fn partition_to_config(partition: &Partition) -> Result<SegregatedConfig> {
    let scales = interface_scales(partition)?;
    let components = partition
        .eigenfunctions
        .iter()
        .zip(&scales)
        .map(|(phi, &a)| phi.scaled(a.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    let reaction = ReactionSpec::new(
        partition
            .eigenvalues
            .iter()
            .map(|&lambda| Reaction::Linear { lambda })
            .collect(),
    )?;
    SegregatedConfig::new(components, reaction, 0.0)
}

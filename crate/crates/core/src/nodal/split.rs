use std::collections::VecDeque;

use crate::almgren::SegregatedConfig;
use crate::error::{Error, Result};
use crate::grid::{distance, Point, ScalarField};

/// Splits component `i` inside the ball `B_radius(center)` into its two
/// 4-connected pieces above `threshold`, each extended by zero.
pub fn split_component(
    u: &SegregatedConfig,
    i: usize,
    center: Point,
    radius: f64,
    threshold: f64,
) -> Result<(ScalarField, ScalarField)> {
    if i >= u.h_components() {
        return Err(Error::InvalidParams(format!(
            "component {i} out of range (h = {})",
            u.h_components()
        )));
    }
    let g = *u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let vals = u.component(i).values();
    let inside: Vec<bool> = (0..g.len())
        .map(|k| vals[k] > threshold && distance(g.coords_of(k), center) <= radius)
        .collect();
    let mut label = vec![usize::MAX; g.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..g.len() {
        if !inside[start] || label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (a, b) = g.ij(k);
            let mut visit = |q: usize| {
                if inside[q] && label[q] == usize::MAX {
                    label[q] = count;
                    queue.push_back(q);
                }
            };
            if a > 0 {
                visit(k - 1);
            }
            if a + 1 < nx {
                visit(k + 1);
            }
            if b > 0 {
                visit(k - nx);
            }
            if b + 1 < ny {
                visit(k + nx);
            }
        }
        count += 1;
    }
    if count != 2 {
        return Err(Error::NotTwoComponents(count));
    }
    let piece = |l: usize| {
        let v = (0..g.len())
            .map(|k| if label[k] == l { vals[k] } else { 0.0 })
            .collect();
        ScalarField::new(g, v)
    };
    Ok((piece(0)?, piece(1)?))
}

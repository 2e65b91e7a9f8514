use crate::grid::{laplacian, MaskedField, ScalarField};

use super::config::SegregatedConfig;

/// Discrete defect `f_i(u_i) + Δ_h u_i` of every component at interior
/// nodes: the nodal stand-in for the measures concentrated on the interface.
#[derive(Debug, Clone)]
pub struct ResidualMeasure {
    pub components: Vec<MaskedField>,
}

impl ResidualMeasure {
    pub fn compute(u: &SegregatedConfig) -> Self {
        let components = u
            .components()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut lap = laplacian(c);
                let f = u.reaction().get(i);
                let values: Vec<f64> = lap
                    .field
                    .values()
                    .iter()
                    .zip(c.values())
                    .zip(&lap.valid)
                    .map(|((l, &s), &ok)| if ok { l + f.value(s.max(0.0)) } else { 0.0 })
                    .collect();
                lap.field = ScalarField::new(*c.grid(), values).expect("finite");
                lap
            })
            .collect();
        Self { components }
    }

    /// Most negative defect over all components and interior nodes.
    pub fn min_value(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|m| m.iter_valid().map(|(_, v)| v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Fraction of `∑ |defect|` carried by nodes outside `near`.
    pub fn far_mass_fraction(&self, near: &[bool]) -> f64 {
        let (mut far, mut total) = (0.0, 0.0);
        for m in &self.components {
            for (k, v) in m.iter_valid() {
                total += v.abs();
                if !near[k] {
                    far += v.abs();
                }
            }
        }
        if total > 0.0 {
            far / total
        } else {
            0.0
        }
    }
}

//! Energy `E`, boundary average `H`, frequency `N = E / H` and remainder `R`
//! around a point, plus monotonicity, doubling and log-derivative checks.

mod checks;
mod config;
mod frequency;
mod reaction;
mod residual;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::grid::Point;

pub use checks::{
    doubling_check, extrapolate_n0, log_derivative_identity_check, monotonicity_check,
    monotonicity_check_with, violation, DoublingReport, MonotonicityOptions, MonotonicityReport,
    C_MAX, C_RESOLUTION, MONOTONICITY_SLACK,
};
pub use config::{overlap_ratio, SegregatedConfig, EPS_NEG};
pub use frequency::{
    average, dirichlet_energy, energy, frequency, frequency_profile, geometric_radii,
    pohozaev_remainder, profile_at, quantities, FrequencyProfile, Quantities, DIM, TAU_H,
};
pub use reaction::{Reaction, ReactionSpec};
pub use residual::ResidualMeasure;

/// JSON metadata written next to a profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMetadata {
    pub center: Point,
    #[serde(rename = "C_tilde")]
    pub c_tilde: Option<f64>,
    #[serde(rename = "N0_extrapolated")]
    pub n0_extrapolated: Option<f64>,
    pub pass_flags: BTreeMap<String, bool>,
}

impl ProfileMetadata {
    pub fn new(profile: &FrequencyProfile, report: Option<&MonotonicityReport>) -> Self {
        let mut pass_flags = BTreeMap::new();
        if let Some(r) = report {
            pass_flags.insert("monotonicity".to_string(), r.pass);
        }
        Self {
            center: profile.center,
            c_tilde: report.map(|r| r.c_tilde),
            n0_extrapolated: report.map(|r| r.n0),
            pass_flags,
        }
    }
}

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ToleranceProfile {
    Strict,
    #[default]
    Default,
}

/// Pass thresholds for the checks the driver declares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `|N(0+) - 1|` at regular points, `3/2 - N(0+)` at singular ones, and
    /// the degree error of prototypes and blowups.
    pub n0: f64,
    pub reflection_mismatch: f64,
    /// Largest deviation from equal angles, degrees.
    pub angle_deg: f64,
    /// Largest accepted monotonicity constant `C̃`.
    pub c_tilde: f64,
    /// Relative residual of the blowup scaling identities.
    pub scaling: f64,
}

impl ToleranceProfile {
    pub fn tolerances(self) -> Tolerances {
        match self {
            Self::Default => Tolerances {
                n0: 0.15,
                reflection_mismatch: 0.1,
                angle_deg: 5.0,
                c_tilde: 10.0,
                scaling: 1e-2,
            },
            Self::Strict => Tolerances {
                n0: 0.05,
                reflection_mismatch: 0.02,
                angle_deg: 3.0,
                c_tilde: 10.0,
                scaling: 1e-3,
            },
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Point;

use super::config::SegregatedConfig;
use super::frequency::{average, FrequencyProfile};

/// Relative slack allowed in the monotonicity of `e^{C r} (N + 1)`.
pub const MONOTONICITY_SLACK: f64 = 1e-2;
/// Largest constant tried before declaring failure.
pub const C_MAX: f64 = 1e3;
/// Bisection resolution for the fitted constant.
pub const C_RESOLUTION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityOptions {
    pub slack: f64,
    pub c_max: f64,
    /// Radius window for the `N(0+)` fit; `None` uses `[r_min, r_max / 3]`.
    pub window: Option<(f64, f64)>,
}

impl Default for MonotonicityOptions {
    fn default() -> Self {
        Self {
            slack: MONOTONICITY_SLACK,
            c_max: C_MAX,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Smallest `C >= 0` making `e^{C r}(N + 1)` nondecreasing up to the slack.
    pub c_tilde: f64,
    /// Largest relative decrease of `e^{C r}(N + 1)` between consecutive radii.
    pub max_violation: f64,
    /// Linear extrapolation of `N` to `r = 0`.
    pub n0: f64,
    pub window: (f64, f64),
    /// The fitted constant meets the slack and, when the reaction vanishes,
    /// `N` itself is nondecreasing.
    pub pass: bool,
}

/// Largest relative decrease `max_k (1 - g_{k+1} / g_k)`, clipped at 0, of
/// `g = e^{C r} (N + 1)`.
pub fn violation(radii: &[f64], n: &[f64], c: f64) -> f64 {
    let mut worst = 0.0_f64;
    for k in 0..radii.len().saturating_sub(1) {
        let growth = (c * (radii[k + 1] - radii[k])).exp();
        let dec = 1.0 - growth * (n[k + 1] + 1.0) / (n[k] + 1.0);
        worst = worst.max(dec);
    }
    worst
}

/// Least-squares line through `(r, N)` for radii in `window`, evaluated at 0.
/// Falls back to the smallest third of the samples if the window holds fewer
/// than three radii.
pub fn extrapolate_n0(radii: &[f64], n: &[f64], window: (f64, f64)) -> (f64, (f64, f64)) {
    let tol = 1e-12 * window.1.abs().max(1.0);
    let mut idx: Vec<usize> = (0..radii.len())
        .filter(|&k| radii[k] >= window.0 - tol && radii[k] <= window.1 + tol)
        .collect();
    if idx.len() < 3 {
        idx = (0..radii.len().div_ceil(3).max(2.min(radii.len()))).collect();
    }
    let used = (radii[idx[0]], radii[*idx.last().unwrap()]);
    if idx.len() == 1 {
        return (n[idx[0]], used);
    }
    let m = idx.len() as f64;
    let mr = idx.iter().map(|&k| radii[k]).sum::<f64>() / m;
    let mn = idx.iter().map(|&k| n[k]).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &k in &idx {
        sxy += (radii[k] - mr) * (n[k] - mn);
        sxx += (radii[k] - mr) * (radii[k] - mr);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (mn - slope * mr, used)
}

/// Fits the monotonicity constant of `e^{C r}(N(r) + 1)` and extrapolates
/// `N(0+)`. `d_bound = 0` declares a reaction-free configuration.
pub fn monotonicity_check(profile: &FrequencyProfile, d_bound: f64) -> Result<MonotonicityReport> {
    monotonicity_check_with(profile, d_bound, &MonotonicityOptions::default())
}

pub fn monotonicity_check_with(
    profile: &FrequencyProfile,
    d_bound: f64,
    opts: &MonotonicityOptions,
) -> Result<MonotonicityReport> {
    if profile.len() < 8 {
        return Err(Error::InvalidParams(format!(
            "monotonicity needs at least 8 radii, got {}",
            profile.len()
        )));
    }
    let (r, n) = (&profile.radii, &profile.frequency);
    let c_tilde = if violation(r, n, 0.0) <= opts.slack {
        0.0
    } else {
        let worst = violation(r, n, opts.c_max);
        if worst > opts.slack {
            return Err(Error::NonMonotone {
                c_max: opts.c_max,
                violation: worst,
            });
        }
        let (mut lo, mut hi) = (0.0, opts.c_max);
        while hi - lo > C_RESOLUTION {
            let mid = 0.5 * (lo + hi);
            if violation(r, n, mid) <= opts.slack {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let max_violation = violation(r, n, c_tilde);
    let window = opts
        .window
        .unwrap_or((r[0], r[r.len() - 1] / 3.0));
    let (n0, window) = extrapolate_n0(r, n, window);
    Ok(MonotonicityReport {
        c_tilde,
        max_violation,
        n0,
        window,
        pass: max_violation <= opts.slack && (d_bound > 0.0 || c_tilde == 0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    /// `H(r2) / H(r1)`.
    pub ratio: f64,
    /// `C̄ = (max N + 1) e^{C̃ r̃} - 1`.
    pub c_bar: f64,
    /// `(r2 / r1)^{2 C̄}`.
    pub bound: f64,
    pub pass: bool,
}

/// Checks `H(r2) <= H(r1) (r2 / r1)^{2 C̄}` with `C̄` built from the
/// profile's largest frequency and radius.
pub fn doubling_check(
    u: &SegregatedConfig,
    x0: Point,
    r1: f64,
    r2: f64,
    c_tilde: f64,
    profile: &FrequencyProfile,
) -> Result<DoublingReport> {
    let r_tilde = profile.radii.last().copied().unwrap_or(r2);
    let c_bar = ((profile.max_frequency() + 1.0) * (c_tilde * r_tilde).exp() - 1.0).max(0.0);
    let ratio = if r1 == r2 {
        1.0
    } else {
        average(u, x0, r2)? / average(u, x0, r1)?
    };
    let bound = (r2 / r1).powf(2.0 * c_bar);
    Ok(DoublingReport {
        ratio,
        c_bar,
        bound,
        pass: ratio <= bound * (1.0 + MONOTONICITY_SLACK),
    })
}

/// Largest relative mismatch between `d log H / d log r` (centered
/// differences) and `2 N` at interior radii.
pub fn log_derivative_identity_check(profile: &FrequencyProfile) -> Result<f64> {
    if profile.len() < 8 {
        return Err(Error::InvalidParams(format!(
            "log-derivative check needs at least 8 radii, got {}",
            profile.len()
        )));
    }
    let (r, h, n) = (&profile.radii, &profile.average, &profile.frequency);
    let mut worst = 0.0_f64;
    for k in 1..r.len() - 1 {
        let lhs = (h[k + 1].ln() - h[k - 1].ln()) / (r[k + 1].ln() - r[k - 1].ln());
        let rhs = 2.0 * n[k];
        let diff = (lhs - rhs).abs();
        let scale = lhs.abs().max(rhs.abs());
        let rel = if scale < 1e-9 { 0.0 } else { diff / scale };
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n: impl Fn(f64) -> f64, k: usize) -> FrequencyProfile {
        let radii: Vec<f64> = (0..k).map(|i| 0.05 + 0.9 * i as f64 / (k - 1) as f64).collect();
        let frequency: Vec<f64> = radii.iter().map(|&r| n(r)).collect();
        FrequencyProfile {
            center: [0.0, 0.0],
            energy: frequency.clone(),
            average: vec![1.0; k],
            remainder: vec![0.0; k],
            radii,
            frequency,
        }
    }

    #[test]
    fn constant_frequency_needs_no_constant() {
        let p = synthetic(|_| 1.0, 12);
        let rep = monotonicity_check(&p, 0.0).unwrap();
        assert_eq!(rep.c_tilde, 0.0);
        assert_eq!(rep.max_violation, 0.0);
        assert!((rep.n0 - 1.0).abs() < 1e-12);
        assert!(rep.pass);
    }

    #[test]
    fn decreasing_frequency_matches_pairwise_oracle() {
        // independent oracle: each consecutive pair needs
        // C >= ln((1 - s)(N_k + 1)/(N_{k+1} + 1)) / Δr
        let p = synthetic(|r| 2.0 - r, 16);
        let rep = monotonicity_check(&p, 0.0).unwrap();
        let s = MONOTONICITY_SLACK;
        let oracle = p
            .radii
            .windows(2)
            .zip(p.frequency.windows(2))
            .map(|(r, n)| ((1.0 - s) * (n[0] + 1.0) / (n[1] + 1.0)).ln() / (r[1] - r[0]))
            .fold(0.0_f64, f64::max);
        assert!((rep.c_tilde - oracle).abs() <= 2.0 * C_RESOLUTION, "{} vs {oracle}", rep.c_tilde);
        // without slack the requirement approaches 1 / (3 - r)
        assert!(oracle < 1.0 / (3.0 - 0.95) && oracle > 0.0);
        assert!(!rep.pass, "reaction-free profiles must not need a constant");
        assert!(monotonicity_check(&p, 1.0).unwrap().pass);
    }

    #[test]
    fn steep_decrease_is_non_monotone() {
        let p = synthetic(|r| 1e200 * (-4000.0 * r).exp(), 10);
        assert!(matches!(
            monotonicity_check(&p, 1.0),
            Err(Error::NonMonotone { .. })
        ));
    }

    #[test]
    fn extrapolation_is_exact_on_lines() {
        let p = synthetic(|r| 1.5 + 0.3 * r, 30);
        let (n0, w) = extrapolate_n0(&p.radii, &p.frequency, (0.05, 0.3));
        assert!((n0 - 1.5).abs() < 1e-12);
        assert!(w.0 >= 0.05 && w.1 <= 0.3);
    }

    #[test]
    fn log_derivative_vanishes_for_power_laws() {
        let alpha = 1.5;
        let radii: Vec<f64> = (0..10).map(|k| 0.1 * 1.2_f64.powi(k)).collect();
        let p = FrequencyProfile {
            center: [0.0, 0.0],
            average: radii.iter().map(|r| 3.0 * r.powf(2.0 * alpha)).collect(),
            energy: vec![0.0; 10],
            frequency: vec![alpha; 10],
            remainder: vec![0.0; 10],
            radii,
        };
        assert!(log_derivative_identity_check(&p).unwrap() < 1e-12);
    }

    #[test]
    fn short_profiles_are_rejected() {
        let p = synthetic(|_| 1.0, 5);
        assert!(monotonicity_check(&p, 0.0).is_err());
        assert!(log_derivative_identity_check(&p).is_err());
    }
}

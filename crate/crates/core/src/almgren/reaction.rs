use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form reaction term `f(s)` for one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Reaction {
    Zero,
    /// `omega s^3 - lambda s`.
    Cubic { omega: f64, lambda: f64 },
    /// `rate s (1 - s / capacity)`.
    Logistic { rate: f64, capacity: f64 },
    /// `lambda s`.
    Linear { lambda: f64 },
}

impl Reaction {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Reaction::Zero => 0.0,
            Reaction::Cubic { omega, lambda } => omega * s * s * s - lambda * s,
            Reaction::Logistic { rate, capacity } => rate * s * (1.0 - s / capacity),
            Reaction::Linear { lambda } => lambda * s,
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            Reaction::Zero => 0.0,
            Reaction::Cubic { omega, lambda } => 3.0 * omega * s * s - lambda,
            Reaction::Logistic { rate, capacity } => rate * (1.0 - 2.0 * s / capacity),
            Reaction::Linear { lambda } => lambda,
        }
    }

    /// `f(s) / s`, continuously extended to `s = 0`.
    pub fn ratio(&self, s: f64) -> f64 {
        match *self {
            Reaction::Zero => 0.0,
            Reaction::Cubic { omega, lambda } => omega * s * s - lambda,
            Reaction::Logistic { rate, capacity } => rate * (1.0 - s / capacity),
            Reaction::Linear { lambda } => lambda,
        }
    }

    /// `sup |f(s) / s|` over `0 <= s <= s_max`.
    pub fn ratio_bound(&self, s_max: f64) -> f64 {
        // f(s)/s is monotone in s for every variant, so the endpoints suffice
        self.ratio(0.0).abs().max(self.ratio(s_max).abs())
    }

    /// Reaction of the rescaled field `v(x) = u(x0 + t x) / rho`:
    /// `g(s) = (t^2 / rho) f(rho s)`.
    pub fn rescale(&self, t: f64, rho: f64) -> Reaction {
        let t2 = t * t;
        match *self {
            Reaction::Zero => Reaction::Zero,
            Reaction::Cubic { omega, lambda } => Reaction::Cubic {
                omega: omega * t2 * rho * rho,
                lambda: lambda * t2,
            },
            Reaction::Logistic { rate, capacity } => Reaction::Logistic {
                rate: rate * t2,
                capacity: capacity / rho,
            },
            Reaction::Linear { lambda } => Reaction::Linear { lambda: lambda * t2 },
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Reaction::Zero => true,
            Reaction::Cubic { omega, lambda } => omega.is_finite() && lambda.is_finite(),
            Reaction::Logistic { rate, capacity } => {
                rate.is_finite() && capacity.is_finite() && capacity > 0.0
            }
            Reaction::Linear { lambda } => lambda.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("bad reaction {self:?}")))
        }
    }
}

/// Per-component reaction terms `F = (f_1, ..., f_h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReactionSpec {
    terms: Vec<Reaction>,
}

impl ReactionSpec {
    pub fn new(terms: Vec<Reaction>) -> Result<Self> {
        for t in &terms {
            t.validate()?;
        }
        Ok(Self { terms })
    }

    pub fn zero(h: usize) -> Self {
        Self {
            terms: vec![Reaction::Zero; h],
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Reaction] {
        &self.terms
    }

    pub fn get(&self, i: usize) -> &Reaction {
        &self.terms[i]
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| *t == Reaction::Zero)
    }

    /// `d = max_i sup |f_i(s) / s|` over `0 <= s <= s_max`.
    pub fn d_bound(&self, s_max: f64) -> f64 {
        self.terms
            .iter()
            .fold(0.0, |m, t| f64::max(m, t.ratio_bound(s_max)))
    }

    pub fn rescale(&self, t: f64, rho: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|r| r.rescale(t, rho)).collect(),
        }
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            terms: order.iter().map(|&i| self.terms[i]).collect(),
        }
    }
}

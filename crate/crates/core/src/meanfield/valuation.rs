use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::central_diff;
use crate::pricing::linspace;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied valuation with its derivative.
#[derive(Clone)]
pub struct CustomValuation {
    pub name: String,
    pub value: ScalarFn,
    pub derivative: ScalarFn,
}

impl fmt::Debug for CustomValuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomValuation").field("name", &self.name).finish_non_exhaustive()
    }
}

/// Utility `v(p)` of booking a listing priced at `p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Valuation {
    /// `v(p) = exp(V - p)`.
    Exponential {
        #[serde(rename = "V")]
        level: f64,
    },
    /// `v(p) = intercept - slope * p`, meaningful where positive.
    Linear { intercept: f64, slope: f64 },
    /// `v(p) = scale * p^(-exponent)`.
    Power { scale: f64, exponent: f64 },
    #[serde(skip)]
    Custom(CustomValuation),
}

impl Valuation {
    pub fn exponential(level: f64) -> Self {
        Valuation::Exponential { level }
    }

    pub fn custom<V, D>(name: impl Into<String>, value: V, derivative: D) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Valuation::Custom(CustomValuation {
            name: name.into(),
            value: Arc::new(value),
            derivative: Arc::new(derivative),
        })
    }

    pub fn value(&self, p: f64) -> f64 {
        match self {
            Valuation::Exponential { level } => (level - p).exp(),
            Valuation::Linear { intercept, slope } => intercept - slope * p,
            Valuation::Power { scale, exponent } => scale * p.powf(-exponent),
            Valuation::Custom(c) => (c.value)(p),
        }
    }

    pub fn derivative(&self, p: f64) -> f64 {
        match self {
            Valuation::Exponential { level } => -(level - p).exp(),
            Valuation::Linear { slope, .. } => -slope,
            Valuation::Power { scale, exponent } => -exponent * scale * p.powf(-exponent - 1.0),
            Valuation::Custom(c) => (c.derivative)(p),
        }
    }

    /// Largest price with positive valuation, if the family has one.
    pub fn price_ceiling(&self) -> f64 {
        match self {
            Valuation::Linear { intercept, slope } => intercept / slope,
            _ => f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, value: f64, ok: bool, reason: &'static str| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, value, reason })
            }
        };
        match *self {
            Valuation::Exponential { level } => check("V", level, true, "must be finite"),
            Valuation::Linear { intercept, slope } => {
                check("intercept", intercept, intercept > 0.0, "must be positive")?;
                check("slope", slope, slope > 0.0, "must be positive")
            }
            Valuation::Power { scale, exponent } => {
                check("scale", scale, scale > 0.0, "must be positive")?;
                check("exponent", exponent, exponent > 0.0, "must be positive")
            }
            Valuation::Custom(_) => Ok(()),
        }
    }

    /// Pointwise part of the valuation assumptions at one price: positive,
    /// finite and strictly decreasing.
    pub(crate) fn check_at(&self, p: f64) -> Result<(f64, f64)> {
        let v = self.value(p);
        let dv = self.derivative(p);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::AssumptionViolation {
                assumption: "valuation positivity",
                detail: format!("v({p}) = {v}"),
            });
        }
        if !(dv < 0.0 && dv.is_finite()) {
            return Err(Error::AssumptionViolation {
                assumption: "valuation strictly decreasing",
                detail: format!("v'({p}) = {dv}"),
            });
        }
        Ok((v, dv))
    }
}

/// Grid check of the valuation assumptions on `[c + 1e-9, price_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValuationReport {
    pub price_lo: f64,
    pub price_hi: f64,
    pub samples: usize,
    pub positive: bool,
    pub strictly_decreasing: bool,
    /// Analytic derivative finite and consistent with a central difference.
    pub differentiable: bool,
    /// `-(p - c) v'(p) / v(p)` strictly increasing across the grid.
    pub failure_rate_increasing: bool,
}

impl ValuationReport {
    pub fn all_hold(&self) -> bool {
        self.positive && self.strictly_decreasing && self.differentiable && self.failure_rate_increasing
    }
}

/// Offset from the cost where the grid starts; some conditions are stated on
/// the open interval above the cost.
pub const COST_OFFSET: f64 = 1e-9;

pub fn check_valuation(valuation: &Valuation, cost: f64, price_hi: f64, samples: usize) -> ValuationReport {
    let lo = cost + COST_OFFSET;
    let grid = linspace(lo, price_hi, samples.max(2));
    let values: Vec<f64> = grid.iter().map(|&p| valuation.value(p)).collect();
    let positive = values.iter().all(|&v| v > 0.0 && v.is_finite());
    let strictly_decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let differentiable = grid.iter().all(|&p| {
        // An absolute step suits smooth functions near 0, a relative one a
        // pole at 0; accept either.
        let analytic = valuation.derivative(p);
        let agrees = |fd: f64| analytic.is_finite() && (fd - analytic).abs() <= 1e-5 * analytic.abs().max(1e-3);
        let absolute = central_diff(|x| valuation.value(x), p, 1e-6).is_ok_and(agrees);
        let scale = if p == 0.0 { 1.0 } else { p.abs() };
        absolute || central_diff(|x| valuation.value(scale * x), 1.0, 1e-4).is_ok_and(|fd| agrees(fd / scale))
    });
    let rate: Vec<f64> = grid.iter().map(|&p| -(p - cost) * valuation.derivative(p) / valuation.value(p)).collect();
    let failure_rate_increasing = rate.windows(2).all(|w| w[1] - w[0] > 1e-12 * w[0].abs().max(w[1].abs()).max(1e-300));
    ValuationReport {
        price_lo: lo,
        price_hi,
        samples: grid.len(),
        positive,
        strictly_decreasing,
        differentiable,
        failure_rate_increasing,
    }
}

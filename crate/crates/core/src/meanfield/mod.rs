//! Homogeneous two-sided market in its mean-field steady state.
//!
//! A mass `rho` of identical listings is either available or booked.
//! Customers arrive at rate `lambda`, see every available listing and book
//! one with logit probability `s v(p) / (epsilon + s v(p))`, where `s` is the
//! available mass. A booked listing frees up at rate `tau`. Market balance
//! is `beta = lambda / tau`: small `beta` is demand constrained, large `beta`
//! supply constrained.
//!
//! Price experiments randomize either listings ([`Design::Lr`]: a fraction
//! `q` of listings carries the treatment price and every customer sees both
//! groups) or customers ([`Design::Cr`]: a fraction `q` of customers sees
//! the whole market at the treatment price).

mod experiment;
mod limits;
mod steady;
mod valuation;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use experiment::{
    bias_cr, bias_lr, bias_profit, cr_cross_partials, cr_demands, cr_steady_state, lr_cross_partials, lr_demands,
    lr_steady_state, CrSteadyState, CrossPartials, LrSteadyState, MeanFieldDemand,
};
pub use limits::{limit_values, LimitValues};
pub use steady::{
    bracketed_s_star, closed_form_s_star, demand, demand_price_derivative, gte_demand_mf, gte_profit_mf,
    s_star_beta_derivative, s_star_price_derivative, steady_state, SolverKind, SteadyState,
};
pub use valuation::{check_valuation, CustomValuation, Valuation, ValuationReport, COST_OFFSET};

/// Which side of the market is randomized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// Listing-side randomization.
    Lr,
    /// Customer-side randomization.
    Cr,
}

impl Design {
    pub const BOTH: [Design; 2] = [Design::Lr, Design::Cr];

    pub fn as_str(self) -> &'static str {
        match self {
            Design::Lr => "lr",
            Design::Cr => "cr",
        }
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Design {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" => Ok(Design::Lr),
            "cr" => Ok(Design::Cr),
            other => Err(Error::InvalidConfig(format!("unknown design `{other}` (expected lr or cr)"))),
        }
    }
}

/// Market primitives. `beta` is always derived from `lambda / tau`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    /// Listing mass.
    pub rho: f64,
    /// Customer arrival rate.
    pub lambda: f64,
    /// Rate at which a booked listing becomes available again.
    pub tau: f64,
    /// Weight of the outside option in the logit choice.
    pub epsilon: f64,
    /// Marginal cost per booking.
    pub cost: f64,
    pub valuation: Valuation,
}

impl MarketParams {
    /// Validated parameters with an exponential valuation `exp(V - p)`.
    pub fn exponential(level: f64, rho: f64, lambda: f64, tau: f64, epsilon: f64, cost: f64) -> Result<Self> {
        let params = Self { rho, lambda, tau, epsilon, cost, valuation: Valuation::exponential(level) };
        params.validate()?;
        Ok(params)
    }

    pub fn beta(&self) -> f64 {
        self.lambda / self.tau
    }

    /// Same market with `lambda` rescaled so that `lambda / tau = beta`.
    pub fn with_beta(&self, beta: f64) -> Self {
        Self { lambda: beta * self.tau, ..self.clone() }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("rho", self.rho), ("lambda", self.lambda), ("tau", self.tau), ("epsilon", self.epsilon)];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter { name, value, reason: "must be > 0" });
            }
        }
        if !(self.cost >= 0.0 && self.cost.is_finite()) {
            return Err(Error::InvalidParameter { name: "cost", value: self.cost, reason: "must be >= 0" });
        }
        self.valuation.validate()
    }

    /// Rejects prices below cost and prices where the valuation is not
    /// positive and strictly decreasing. Returns `(v(p), v'(p))`.
    pub(crate) fn check_price(&self, p: f64) -> Result<(f64, f64)> {
        if p.is_nan() || p < self.cost {
            return Err(Error::PriceBelowCost { price: p, cost: self.cost });
        }
        self.valuation.check_at(p)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(MarketParams::exponential(5.0, 1.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(MarketParams::exponential(5.0, 1.0, 1.0, 1.0, -1.0, 1.0).is_err());
        assert!(MarketParams::exponential(5.0, 1.0, 1.0, 1.0, 1.0, -0.1).is_err());
        assert!(MarketParams::exponential(5.0, 1.0, 1.0, 1.0, 1.0, 0.0).is_ok());
        let p = fixtures::worked_instance().with_beta(4.0);
        assert_eq!(p.lambda, 4.0);
        assert_eq!(p.beta(), 4.0);
        assert!(matches!(p.check_price(0.5), Err(Error::PriceBelowCost { .. })));
    }

    #[test]
    fn design_parsing() {
        assert_eq!("LR".parse::<Design>().unwrap(), Design::Lr);
        assert_eq!("cr".parse::<Design>().unwrap(), Design::Cr);
        assert!("both".parse::<Design>().is_err());
    }
}

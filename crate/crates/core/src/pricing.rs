//! Demand and profit treatment effects for price experiments.
//!
//! A [`DemandSystem`] carries the market demand `D(p)` and the scaled
//! control/treatment demands `D0(p0, p1, q)`, `D1(p0, p1, q)` (group demand
//! divided by group fraction). Profit is `(p - c) D(p)`. The naive
//! estimators and their biases follow from the cross-partials of the
//! experimental demands at `p0 = p1`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::bias::MetricSystem;
use crate::error::{check_fraction, Error, Result};
use crate::numerics::{derivative, partials, Tolerances};

pub trait DemandSystem {
    fn demand(&self, p: f64) -> f64;
    fn control_demand(&self, p0: f64, p1: f64, q: f64) -> f64;
    fn treatment_demand(&self, p0: f64, p1: f64, q: f64) -> f64;
    fn cost(&self) -> f64;

    /// Prices over which the system is meant to be evaluated; the lower end
    /// is at least the cost.
    fn price_range(&self) -> (f64, f64) {
        (self.cost(), f64::INFINITY)
    }
}

impl<S: DemandSystem + ?Sized> DemandSystem for &S {
    fn demand(&self, p: f64) -> f64 {
        (**self).demand(p)
    }
    fn control_demand(&self, p0: f64, p1: f64, q: f64) -> f64 {
        (**self).control_demand(p0, p1, q)
    }
    fn treatment_demand(&self, p0: f64, p1: f64, q: f64) -> f64 {
        (**self).treatment_demand(p0, p1, q)
    }
    fn cost(&self) -> f64 {
        (**self).cost()
    }
    fn price_range(&self) -> (f64, f64) {
        (**self).price_range()
    }
}

/// A [`DemandSystem`] assembled from closures.
pub struct FnDemandSystem<D, C, T> {
    pub demand: D,
    pub control: C,
    pub treatment: T,
    pub cost: f64,
    pub price_hi: f64,
}

impl<D, C, T> FnDemandSystem<D, C, T> {
    pub fn new(demand: D, control: C, treatment: T, cost: f64) -> Self {
        Self { demand, control, treatment, cost, price_hi: f64::INFINITY }
    }
}

impl<D, C, T> DemandSystem for FnDemandSystem<D, C, T>
where
    D: Fn(f64) -> f64,
    C: Fn(f64, f64, f64) -> f64,
    T: Fn(f64, f64, f64) -> f64,
{
    fn demand(&self, p: f64) -> f64 {
        (self.demand)(p)
    }
    fn control_demand(&self, p0: f64, p1: f64, q: f64) -> f64 {
        (self.control)(p0, p1, q)
    }
    fn treatment_demand(&self, p0: f64, p1: f64, q: f64) -> f64 {
        (self.treatment)(p0, p1, q)
    }
    fn cost(&self) -> f64 {
        self.cost
    }
    fn price_range(&self) -> (f64, f64) {
        (self.cost, self.price_hi)
    }
}

/// Profit viewed as an abstract experiment metric: `T = π`,
/// `T0 = (1 - q) π0`, `T1 = q π1`.
pub struct ProfitMetrics<S>(pub S);

impl<S: DemandSystem> MetricSystem for ProfitMetrics<S> {
    fn global(&self, x: f64) -> f64 {
        (x - self.0.cost()) * self.0.demand(x)
    }
    fn control(&self, x0: f64, x1: f64, q: f64) -> f64 {
        (1.0 - q) * (x0 - self.0.cost()) * self.0.control_demand(x0, x1, q)
    }
    fn treatment(&self, x0: f64, x1: f64, q: f64) -> f64 {
        q * (x1 - self.0.cost()) * self.0.treatment_demand(x0, x1, q)
    }
    fn domain(&self) -> (f64, f64) {
        self.0.price_range()
    }
}

/// Demand viewed as an abstract experiment metric.
pub struct DemandMetrics<S>(pub S);

impl<S: DemandSystem> MetricSystem for DemandMetrics<S> {
    fn global(&self, x: f64) -> f64 {
        self.0.demand(x)
    }
    fn control(&self, x0: f64, x1: f64, q: f64) -> f64 {
        (1.0 - q) * self.0.control_demand(x0, x1, q)
    }
    fn treatment(&self, x0: f64, x1: f64, q: f64) -> f64 {
        q * self.0.treatment_demand(x0, x1, q)
    }
    fn domain(&self) -> (f64, f64) {
        self.0.price_range()
    }
}

fn check_price<S: DemandSystem>(sys: &S, p: f64) -> Result<()> {
    let cost = sys.cost();
    if p.is_nan() || p < cost {
        Err(Error::PriceBelowCost { price: p, cost })
    } else {
        Ok(())
    }
}

fn finite(value: f64, p: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(crate::numerics::NumericsError::EvalFailure { x: p }.into())
    }
}

pub fn profit<S: DemandSystem>(sys: &S, p: f64) -> Result<f64> {
    check_price(sys, p)?;
    finite((p - sys.cost()) * sys.demand(p), p)
}

/// `D'(p0)`, the demand treatment effect.
pub fn gte_demand<S: DemandSystem>(sys: &S, p0: f64, tol: &Tolerances) -> Result<f64> {
    check_price(sys, p0)?;
    let slope = derivative(|p| sys.demand(p), p0, tol)?;
    if slope >= 0.0 {
        warn!("demand is not strictly decreasing at p = {p0} (D' = {slope})");
    }
    Ok(slope)
}

/// `π'(p0) = D(p0) + (p0 - c) D'(p0)`.
pub fn gte_profit<S: DemandSystem>(sys: &S, p0: f64, tol: &Tolerances) -> Result<f64> {
    let slope = gte_demand(sys, p0, tol)?;
    finite(sys.demand(p0) + (p0 - sys.cost()) * slope, p0)
}

/// Partials of the scaled experimental demands at `(p0, p0, q)`.
/// `x` is the control price, `y` the treatment price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DemandPartials {
    pub d0x: f64,
    pub d0y: f64,
    pub d1x: f64,
    pub d1y: f64,
}

impl DemandPartials {
    pub fn naive_gte_demand(&self) -> f64 {
        self.d1y - self.d0y
    }

    pub fn bias_demand(&self) -> f64 {
        self.d0y + self.d1x
    }
}

/// Largest of `|D0(p,p,q) - D(p)|` and `|D1(p,p,q) - D(p)|`.
pub fn consistency_residual<S: DemandSystem>(sys: &S, p: f64, q: f64) -> f64 {
    let market = sys.demand(p);
    let control = (sys.control_demand(p, p, q) - market).abs();
    let treatment = (sys.treatment_demand(p, p, q) - market).abs();
    let r = control.max(treatment);
    if r.is_nan() {
        f64::INFINITY
    } else {
        r
    }
}

pub fn experimental_partials<S: DemandSystem>(sys: &S, p0: f64, q: f64, tol: &Tolerances) -> Result<DemandPartials> {
    check_price(sys, p0)?;
    check_fraction(q)?;
    let residual = consistency_residual(sys, p0, q);
    if residual > tol.consistency_tol * sys.demand(p0).abs().max(1.0) {
        return Err(Error::ConsistencyViolation { x: p0, q, residual });
    }
    let (d0x, d0y) = partials(|a, b| sys.control_demand(a, b, q), p0, p0, tol)?;
    let (d1x, d1y) = partials(|a, b| sys.treatment_demand(a, b, q), p0, p0, tol)?;
    Ok(DemandPartials { d0x, d0y, d1x, d1y })
}

/// Naive demand estimator `D1y - D0y`.
pub fn naive_gte_demand<S: DemandSystem>(sys: &S, p0: f64, q: f64, tol: &Tolerances) -> Result<f64> {
    Ok(experimental_partials(sys, p0, q, tol)?.naive_gte_demand())
}

/// Naive profit estimator `D(p0) + (p0 - c)(D1y - D0y)`.
pub fn naive_gte_profit<S: DemandSystem>(sys: &S, p0: f64, q: f64, tol: &Tolerances) -> Result<f64> {
    let partials = experimental_partials(sys, p0, q, tol)?;
    finite(sys.demand(p0) + (p0 - sys.cost()) * partials.naive_gte_demand(), p0)
}

/// `D0y + D1x`, non-negative whenever the groups are substitutes.
pub fn bias_demand<S: DemandSystem>(sys: &S, p0: f64, q: f64, tol: &Tolerances) -> Result<f64> {
    Ok(experimental_partials(sys, p0, q, tol)?.bias_demand())
}

/// `(p0 - c)(D0y + D1x)`.
pub fn bias_profit<S: DemandSystem>(sys: &S, p0: f64, q: f64, tol: &Tolerances) -> Result<f64> {
    Ok((p0 - sys.cost()) * bias_demand(sys, p0, q, tol)?)
}

/// Region label of a point in a change-of-sign map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Both markup conditions hold: the estimator and the GTE disagree in sign.
    ChangeOfSign,
    CondAFails,
    CondBFails,
    BothFail,
}

impl Region {
    pub fn from_conditions(condition_a: bool, condition_b: bool) -> Self {
        match (condition_a, condition_b) {
            (true, true) => Region::ChangeOfSign,
            (false, true) => Region::CondAFails,
            (true, false) => Region::CondBFails,
            (false, false) => Region::BothFail,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::ChangeOfSign => "change_of_sign",
            Region::CondAFails => "cond_a_fails",
            Region::CondBFails => "cond_b_fails",
            Region::BothFail => "both_fail",
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Markup conditions and sign comparison at one `(p0, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignClassification {
    pub price: f64,
    pub q: f64,
    pub demand: f64,
    pub demand_slope: f64,
    pub gte_pi: f64,
    pub bias_pi: f64,
    pub estimator_pi: f64,
    /// `(p0 - c) / p0 <= -1/e_p`, equivalently `gte_pi >= 0`.
    pub condition_a: bool,
    /// `-1/e_p <= B`, equivalently `estimator_pi <= 0`.
    pub condition_b: bool,
    pub change_of_sign: bool,
    /// Set when `gte_pi` or `estimator_pi` is exactly zero.
    pub boundary: bool,
    pub markup_a: f64,
    pub modified_markup_b: f64,
    /// `markup_a <= modified_markup_b` (up to 1e-9).
    pub markup_order_holds: bool,
    pub elasticity: f64,
    pub experimental_elasticity: f64,
}

impl SignClassification {
    pub fn region(&self) -> Region {
        Region::from_conditions(self.condition_a, self.condition_b)
    }
}

/// Evaluates both markup conditions at `(p0, q)`.
///
/// Condition (b) is decided through the sign of the estimator, which equals
/// the `B`-form comparison without ever dividing by the experimental
/// elasticity.
pub fn classify_sign<S: DemandSystem>(sys: &S, p0: f64, q: f64, tol: &Tolerances) -> Result<SignClassification> {
    check_price(sys, p0)?;
    if p0 <= 0.0 {
        return Err(Error::InvalidParameter { name: "p0", value: p0, reason: "markups need a positive price" });
    }
    let demand = sys.demand(p0);
    let slope = gte_demand(sys, p0, tol)?;
    if !(demand > 0.0) || !(slope < 0.0) {
        return Err(Error::DegenerateDemand { price: p0, demand, slope });
    }
    let partials = experimental_partials(sys, p0, q, tol)?;
    let margin = p0 - sys.cost();
    let gte_pi = demand + margin * slope;
    let bias_pi = margin * partials.bias_demand();
    let estimator_pi = gte_pi - bias_pi;
    let experimental_slope = partials.naive_gte_demand();
    let markup_a = margin / p0;
    let modified_markup_b = markup_a * experimental_slope / slope;
    let condition_a = gte_pi >= 0.0;
    let condition_b = estimator_pi <= 0.0;
    Ok(SignClassification {
        price: p0,
        q,
        demand,
        demand_slope: slope,
        gte_pi,
        bias_pi,
        estimator_pi,
        condition_a,
        condition_b,
        change_of_sign: condition_a && condition_b,
        boundary: gte_pi == 0.0 || estimator_pi == 0.0,
        markup_a,
        modified_markup_b,
        markup_order_holds: markup_a <= modified_markup_b + 1e-9,
        elasticity: slope * p0 / demand,
        experimental_elasticity: p0 * experimental_slope / demand,
    })
}

/// `B(p0, q)` for each `q`, with the spread `max - min`. The modified markup
/// need not be constant in `q` for a general demand system.
pub fn modified_markup_by_q<S: DemandSystem>(
    sys: &S,
    p0: f64,
    qs: &[f64],
    tol: &Tolerances,
) -> Result<(Vec<f64>, f64)> {
    let values =
        qs.iter().map(|&q| classify_sign(sys, p0, q, tol).map(|c| c.modified_markup_b)).collect::<Result<Vec<_>>>()?;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((values, max - min))
}

/// Sampled check of the demand-system assumptions: market demand strictly
/// decreasing, substitutes across groups, and consistency at equal prices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandAssumptionReport {
    pub demand_decreasing: bool,
    pub control_nondecreasing_in_treatment_price: bool,
    pub treatment_nondecreasing_in_control_price: bool,
    pub max_consistency_residual: f64,
    pub consistency_holds: bool,
}

impl DemandAssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.demand_decreasing
            && self.control_nondecreasing_in_treatment_price
            && self.treatment_nondecreasing_in_control_price
            && self.consistency_holds
    }
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Checks the assumptions on an `n`-point price grid over `[lo, hi]` for
/// each `q` in `qs`. Monotonicity allows a relative slack of `1e-12` for
/// round-off in numerically solved demands.
pub fn check_demand_assumptions<S: DemandSystem>(
    sys: &S,
    lo: f64,
    hi: f64,
    n: usize,
    qs: &[f64],
    tol: &Tolerances,
) -> DemandAssumptionReport {
    let prices = linspace(lo, hi, n);
    let slack = |a: f64, b: f64| 1e-12 * a.abs().max(b.abs()).max(1.0);
    let demand_decreasing = prices.windows(2).all(|w| sys.demand(w[1]) < sys.demand(w[0]));
    let mut control_ok = true;
    let mut treatment_ok = true;
    let mut max_residual: f64 = 0.0;
    for &q in qs {
        for &anchor in &prices {
            for w in prices.windows(2) {
                let (c0, c1) = (sys.control_demand(anchor, w[0], q), sys.control_demand(anchor, w[1], q));
                control_ok &= c1 >= c0 - slack(c0, c1);
                let (t0, t1) = (sys.treatment_demand(w[0], anchor, q), sys.treatment_demand(w[1], anchor, q));
                treatment_ok &= t1 >= t0 - slack(t0, t1);
            }
            let scale = sys.demand(anchor).abs().max(1.0);
            max_residual = max_residual.max(consistency_residual(sys, anchor, q) / scale);
        }
    }
    DemandAssumptionReport {
        demand_decreasing,
        control_nondecreasing_in_treatment_price: control_ok,
        treatment_nondecreasing_in_control_price: treatment_ok,
        max_consistency_residual: max_residual,
        consistency_holds: max_residual <= tol.consistency_tol,
    }
}

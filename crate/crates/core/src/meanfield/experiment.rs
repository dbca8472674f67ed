//! Steady states, demands and biases under listing-side (LR) and
//! customer-side (CR) randomization.

use serde::Serialize;

use super::steady;
use super::{Design, MarketParams};
use crate::error::{check_fraction, Error, Result};
use crate::numerics::{find_root_bracketed, Tolerances};
use crate::pricing::DemandSystem;

const RESIDUAL_LIMIT: f64 = 1e-10;

/// Available control and treatment listing masses under LR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrSteadyState {
    pub s0_star: f64,
    pub s1_star: f64,
    /// Attraction weight `s0 v(p0) + s1 v(p1)` of the available listings.
    pub total_weight: f64,
    pub residuals: (f64, f64),
}

/// Available listing mass under CR, where both customer groups share the
/// whole inventory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrSteadyState {
    pub s_star: f64,
    pub residual: f64,
}

fn check_prices(params: &MarketParams, q: f64, p0: f64, p1: f64) -> Result<(f64, f64)> {
    params.validate()?;
    check_fraction(q)?;
    let (v0, _) = params.check_price(p0)?;
    let (v1, _) = params.check_price(p1)?;
    Ok((v0, v1))
}

/// Solves the two coupled LR balance equations.
///
/// For a fixed total weight `W`, group `g` balances at
/// `s_g = rho_g (eps + W) / (eps + W + beta v_g)`, so the system reduces to
/// the scalar fixed point `W = s0(W) v0 + s1(W) v1`. The right side is
/// increasing and concave in `W`, which makes the root on `(0, rho max v]`
/// unique.
pub(crate) fn solve_lr(params: &MarketParams, q: f64, v0: f64, v1: f64) -> Result<LrSteadyState> {
    let eps = params.epsilon;
    let beta = params.beta();
    let masses = [(1.0 - q) * params.rho, q * params.rho];
    let weights = [v0, v1];
    let avail = |w: f64, g: usize| masses[g] * (eps + w) / (eps + w + beta * weights[g]);
    let fixed_point = |w: f64| avail(w, 0) * v0 + avail(w, 1) * v1 - w;
    let hi = params.rho * v0.max(v1);
    let w = find_root_bracketed(fixed_point, 0.0, hi, &Tolerances::machine())
        .map_err(|e| Error::NoConvergence(format!("LR weight fixed point (q = {q}, v0 = {v0}, v1 = {v1}): {e}")))?;
    let (s0, s1) = (avail(w, 0), avail(w, 1));
    let denom = eps + s0 * v0 + s1 * v1;
    let r0 = (masses[0] - s0) * params.tau - params.lambda * s0 * v0 / denom;
    let r1 = (masses[1] - s1) * params.tau - params.lambda * s1 * v1 / denom;
    if r0.abs() > RESIDUAL_LIMIT || r1.abs() > RESIDUAL_LIMIT {
        return Err(Error::NoConvergence(format!("LR residuals ({r0:e}, {r1:e}) at q = {q}")));
    }
    Ok(LrSteadyState { s0_star: s0, s1_star: s1, total_weight: w, residuals: (r0, r1) })
}

pub fn lr_steady_state(params: &MarketParams, q: f64, p0: f64, p1: f64) -> Result<LrSteadyState> {
    let (v0, v1) = check_prices(params, q, p0, p1)?;
    solve_lr(params, q, v0, v1)
}

fn lr_demands_from(params: &MarketParams, q: f64, v0: f64, v1: f64) -> Result<(f64, f64)> {
    let ss = solve_lr(params, q, v0, v1)?;
    let denom = params.epsilon + ss.s0_star * v0 + ss.s1_star * v1;
    let d0 = params.lambda / (1.0 - q) * ss.s0_star * v0 / denom;
    let d1 = params.lambda / q * ss.s1_star * v1 / denom;
    Ok((d0, d1))
}

/// Scaled control and treatment demands `(D0, D1)` under LR.
pub fn lr_demands(params: &MarketParams, q: f64, p0: f64, p1: f64) -> Result<(f64, f64)> {
    let (v0, v1) = check_prices(params, q, p0, p1)?;
    lr_demands_from(params, q, v0, v1)
}

fn booking_prob(s: f64, v: f64, eps: f64) -> f64 {
    s * v / (eps + s * v)
}

/// Single mixed balance equation under CR, solved on `[0, rho]`.
pub(crate) fn solve_cr(params: &MarketParams, q: f64, v0: f64, v1: f64) -> Result<CrSteadyState> {
    let eps = params.epsilon;
    let flow = |s: f64| {
        (params.rho - s) * params.tau
            - params.lambda * (q * booking_prob(s, v1, eps) + (1.0 - q) * booking_prob(s, v0, eps))
    };
    let s = find_root_bracketed(flow, 0.0, params.rho, &Tolerances::machine())
        .map_err(|e| Error::NoConvergence(format!("CR balance (q = {q}): {e}")))?;
    let residual = flow(s);
    if residual.abs() > RESIDUAL_LIMIT {
        return Err(Error::NoConvergence(format!("CR residual {residual:e} at q = {q}")));
    }
    Ok(CrSteadyState { s_star: s, residual })
}

pub fn cr_steady_state(params: &MarketParams, q: f64, p0: f64, p1: f64) -> Result<CrSteadyState> {
    let (v0, v1) = check_prices(params, q, p0, p1)?;
    solve_cr(params, q, v0, v1)
}

fn cr_demands_from(params: &MarketParams, q: f64, v0: f64, v1: f64) -> Result<(f64, f64)> {
    let s = solve_cr(params, q, v0, v1)?.s_star;
    let eps = params.epsilon;
    Ok((params.lambda * booking_prob(s, v0, eps), params.lambda * booking_prob(s, v1, eps)))
}

/// Scaled control and treatment demands `(D0, D1)` under CR.
pub fn cr_demands(params: &MarketParams, q: f64, p0: f64, p1: f64) -> Result<(f64, f64)> {
    let (v0, v1) = check_prices(params, q, p0, p1)?;
    cr_demands_from(params, q, v0, v1)
}

/// Cross-partials of the scaled demands at `p0 = p1 = p`: `D0y` is the
/// response of control demand to the treatment price, `D1x` the response of
/// treatment demand to the control price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossPartials {
    pub d0y: f64,
    pub d1x: f64,
}

impl CrossPartials {
    pub fn bias_demand(&self) -> f64 {
        self.d0y + self.d1x
    }
}

struct Point {
    s: f64,
    v: f64,
    dv: f64,
}

fn point(params: &MarketParams, p: f64) -> Result<Point> {
    params.validate()?;
    let (v, dv) = params.check_price(p)?;
    let s = steady::solve(params, v)?.s_star;
    Ok(Point { s, v, dv })
}

pub fn lr_cross_partials(params: &MarketParams, q: f64, p: f64) -> Result<CrossPartials> {
    check_fraction(q)?;
    let Point { s, v, dv } = point(params, p)?;
    let (lambda, tau, eps) = (params.lambda, params.tau, params.epsilon);
    // d s0* / d p1 at equal prices
    let s0y = lambda * (1.0 - q) * q * tau * s * s * v * dv * (eps + s * v)
        / ((v * (lambda + tau * s) + tau * eps) * (tau * (s * v + eps).powi(2) + lambda * v * eps));
    let d0y = -tau / (1.0 - q) * s0y;
    Ok(CrossPartials { d0y, d1x: (1.0 - q) / q * d0y })
}

pub fn cr_cross_partials(params: &MarketParams, q: f64, p: f64) -> Result<CrossPartials> {
    check_fraction(q)?;
    let Point { s, v, dv } = point(params, p)?;
    let (lambda, tau, eps) = (params.lambda, params.tau, params.epsilon);
    let d1x = -lambda * lambda * (1.0 - q) * eps * eps * v * dv * s
        / ((v * s + eps).powi(2) * (v * (tau * s * (v * s + 2.0 * eps) + lambda * eps) + tau * eps * eps));
    Ok(CrossPartials { d0y: q / (1.0 - q) * d1x, d1x })
}

/// Profit bias under LR in closed form; independent of `q`.
pub fn bias_lr(params: &MarketParams, p: f64) -> Result<f64> {
    let Point { s, v, dv } = point(params, p)?;
    let (eps, beta) = (params.epsilon, params.beta());
    let core = -params.lambda * s * s * v * dv * (eps + s * v)
        / (((eps + s * v) + beta * v) * ((s * v + eps).powi(2) + beta * v * eps));
    Ok((p - params.cost) * core)
}

/// Profit bias under CR in closed form; independent of `q`.
pub fn bias_cr(params: &MarketParams, p: f64) -> Result<f64> {
    let Point { s, v, dv } = point(params, p)?;
    let (eps, beta) = (params.epsilon, params.beta());
    let core = -params.lambda * beta * eps * eps * v * dv * s
        / ((v * s + eps).powi(2) * ((s * v + eps).powi(2) + beta * v * eps));
    Ok((p - params.cost) * core)
}

/// Closed-form profit bias for `design`.
pub fn bias_profit(params: &MarketParams, design: Design, p: f64) -> Result<f64> {
    match design {
        Design::Lr => bias_lr(params, p),
        Design::Cr => bias_cr(params, p),
    }
}

/// The mean-field market as a black-box [`DemandSystem`], for the generic
/// estimators in [`crate::pricing`] and [`crate::bias`].
///
/// Evaluation failures surface as `NaN`. Prices slightly below cost are
/// evaluated as long as the valuation is positive there, so that central
/// differences at `p = c` work.
#[derive(Debug, Clone)]
pub struct MeanFieldDemand {
    pub params: MarketParams,
    pub design: Design,
    pub price_hi: f64,
}

impl MeanFieldDemand {
    pub fn new(params: MarketParams, design: Design) -> Self {
        let price_hi = params.valuation.price_ceiling();
        Self { params, design, price_hi }
    }

    fn valuation(&self, p: f64) -> Option<f64> {
        let v = self.params.valuation.value(p);
        (v > 0.0 && v.is_finite()).then_some(v)
    }

    fn pair(&self, p0: f64, p1: f64, q: f64) -> (f64, f64) {
        let (Some(v0), Some(v1)) = (self.valuation(p0), self.valuation(p1)) else {
            return (f64::NAN, f64::NAN);
        };
        if !(q > 0.0 && q < 1.0) {
            return (f64::NAN, f64::NAN);
        }
        let res = match self.design {
            Design::Lr => lr_demands_from(&self.params, q, v0, v1),
            Design::Cr => cr_demands_from(&self.params, q, v0, v1),
        };
        res.unwrap_or((f64::NAN, f64::NAN))
    }
}

impl DemandSystem for MeanFieldDemand {
    fn demand(&self, p: f64) -> f64 {
        match self.valuation(p).map(|v| (v, steady::solve(&self.params, v))) {
            Some((v, Ok(ss))) => steady::booking_rate(&self.params, v, ss.s_star),
            _ => f64::NAN,
        }
    }
    fn control_demand(&self, p0: f64, p1: f64, q: f64) -> f64 {
        self.pair(p0, p1, q).0
    }
    fn treatment_demand(&self, p0: f64, p1: f64, q: f64) -> f64 {
        self.pair(p0, p1, q).1
    }
    fn cost(&self) -> f64 {
        self.params.cost
    }
    fn price_range(&self) -> (f64, f64) {
        (self.params.cost, self.price_hi)
    }
}

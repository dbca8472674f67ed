use serde::Serialize;

use super::MarketParams;
use crate::error::{Error, Result};
use crate::numerics::{find_root_bracketed, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    ClosedForm,
    Bracketed,
}

/// Steady-state available listing mass at a uniform price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub s_star: f64,
    /// `(rho - s) tau - lambda s v / (epsilon + s v)` at `s_star`.
    pub residual: f64,
    pub solver: SolverKind,
}

const RESIDUAL_LIMIT: f64 = 1e-10;

/// Flow balance: rate at which listings free up minus booking rate.
pub(crate) fn balance_residual(params: &MarketParams, v: f64, s: f64) -> f64 {
    (params.rho - s) * params.tau - params.lambda * s * v / (params.epsilon + s * v)
}

/// Booking rate `lambda s v / (epsilon + s v)`. At the steady state this
/// equals `(rho - s) tau` but does not cancel when `s` is close to `rho`.
pub(crate) fn booking_rate(params: &MarketParams, v: f64, s: f64) -> f64 {
    params.lambda * s * v / (params.epsilon + s * v)
}

/// Positive root of `v s^2 - ((rho - beta) v - epsilon) s - rho epsilon = 0`.
///
/// The textbook form `(a + sqrt(a^2 + 4 rho eps v)) / (2v)` cancels badly
/// when `a = (rho - beta) v - eps` is large and negative, so that branch uses
/// the conjugate `2 rho eps / (sqrt(..) - a)`.
pub fn closed_form_s_star(params: &MarketParams, v: f64) -> f64 {
    let a = (params.rho - params.beta()) * v - params.epsilon;
    let disc = (4.0 * params.rho * params.epsilon * v + a * a).sqrt();
    if a >= 0.0 {
        (a + disc) / (2.0 * v)
    } else {
        2.0 * params.rho * params.epsilon / (disc - a)
    }
}

/// Balance equation solved by Brent's method on `[0, rho]`.
pub fn bracketed_s_star(params: &MarketParams, v: f64, tol: &Tolerances) -> Result<f64> {
    Ok(find_root_bracketed(|s| balance_residual(params, v, s), 0.0, params.rho, tol)?)
}

pub(crate) fn solve(params: &MarketParams, v: f64) -> Result<SteadyState> {
    let s = closed_form_s_star(params, v);
    if s.is_finite() && s > 0.0 && s <= params.rho {
        let residual = balance_residual(params, v, s);
        if residual.abs() <= RESIDUAL_LIMIT {
            return Ok(SteadyState { s_star: s, residual, solver: SolverKind::ClosedForm });
        }
    }
    let s = bracketed_s_star(params, v, &Tolerances::machine())?;
    let residual = balance_residual(params, v, s);
    if !(s > 0.0) || residual.abs() > RESIDUAL_LIMIT {
        return Err(Error::NoConvergence(format!("balance residual {residual:e} at s = {s}")));
    }
    Ok(SteadyState { s_star: s, residual, solver: SolverKind::Bracketed })
}

/// Steady state at price `p`. Requires `p >= c` and a positive, strictly
/// decreasing valuation at `p`.
pub fn steady_state(params: &MarketParams, p: f64) -> Result<SteadyState> {
    params.validate()?;
    let (v, _) = params.check_price(p)?;
    solve(params, v)
}

/// `ds*/dp = -s v' eps / ((tau/lambda)(eps + s v)^2 + v eps)`, positive.
pub(crate) fn s_star_price_slope(params: &MarketParams, s: f64, v: f64, dv: f64) -> f64 {
    let eps = params.epsilon;
    -s * dv * eps / ((eps + s * v).powi(2) / params.beta() + v * eps)
}

pub fn s_star_price_derivative(params: &MarketParams, p: f64) -> Result<f64> {
    params.validate()?;
    let (v, dv) = params.check_price(p)?;
    let s = solve(params, v)?.s_star;
    Ok(s_star_price_slope(params, s, v, dv))
}

/// `ds*/dbeta = -v s (v s + eps) / (eps v (2 s + beta) + v^2 s^2 + eps^2)`,
/// negative.
pub fn s_star_beta_derivative(params: &MarketParams, p: f64) -> Result<f64> {
    params.validate()?;
    let (v, _) = params.check_price(p)?;
    let s = solve(params, v)?.s_star;
    let eps = params.epsilon;
    Ok(-v * s * (v * s + eps) / (eps * v * (2.0 * s + params.beta()) + (v * s).powi(2) + eps * eps))
}

/// Booking rate `D = (rho - s*) tau`.
pub fn demand(params: &MarketParams, p: f64) -> Result<f64> {
    let s = steady_state(params, p)?.s_star;
    Ok(booking_rate(params, params.valuation.value(p), s))
}

/// `D'(p) = -tau ds*/dp`.
pub fn demand_price_derivative(params: &MarketParams, p: f64) -> Result<f64> {
    Ok(-params.tau * s_star_price_derivative(params, p)?)
}

/// Demand treatment effect; identical to [`demand_price_derivative`].
pub fn gte_demand_mf(params: &MarketParams, p: f64) -> Result<f64> {
    demand_price_derivative(params, p)
}

/// Profit treatment effect `tau (rho - s* - (p - c) ds*/dp)`.
pub fn gte_profit_mf(params: &MarketParams, p: f64) -> Result<f64> {
    params.validate()?;
    let (v, dv) = params.check_price(p)?;
    let s = solve(params, v)?.s_star;
    Ok(booking_rate(params, v, s) - params.tau * (p - params.cost) * s_star_price_slope(params, s, v, dv))
}

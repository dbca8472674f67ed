use serde::Serialize;

use super::MarketParams;

/// Limits of the normalized profit GTE and biases at the two market-balance
/// extremes. The `*0` fields are per-`lambda` limits as `beta -> 0`, the
/// `*_inf` fields per-`tau` limits as `beta -> infinity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitValues {
    pub gte0: f64,
    pub bias_lr0: f64,
    pub bias_cr0: f64,
    pub gte_inf: f64,
    pub bias_lr_inf: f64,
    pub bias_cr_inf: f64,
}

pub fn limit_values(params: &MarketParams, p: f64) -> LimitValues {
    let v = params.valuation.value(p);
    let dv = params.valuation.derivative(p);
    let (rho, eps) = (params.rho, params.epsilon);
    let margin = p - params.cost;
    let open = eps + rho * v;
    LimitValues {
        gte0: rho * v / open + margin * rho * dv * eps / (open * open),
        bias_lr0: -margin * rho * rho * v * dv / (open * open),
        bias_cr0: 0.0,
        gte_inf: rho,
        bias_lr_inf: 0.0,
        bias_cr_inf: -rho * margin * dv / v,
    }
}

//! One-point summaries of the mean-field market built from the closed-form
//! expressions (no finite differences).

use serde::Serialize;

use crate::error::{check_fraction, Result};
use crate::meanfield::{
    cr_cross_partials, lr_cross_partials, s_star_price_derivative, steady_state, CrossPartials, Design, MarketParams,
    SolverKind,
};
use crate::pricing::{Region, SignClassification};

fn design_partials(params: &MarketParams, design: Design, q: f64, p: f64) -> Result<CrossPartials> {
    match design {
        Design::Lr => lr_cross_partials(params, q, p),
        Design::Cr => cr_cross_partials(params, q, p),
    }
}

/// Markup conditions for the mean-field market, from analytic derivatives.
/// Same semantics as [`crate::pricing::classify_sign`].
pub fn analytic_classification(params: &MarketParams, design: Design, q: f64, p: f64) -> Result<SignClassification> {
    check_fraction(q)?;
    let demand = crate::meanfield::demand(params, p)?;
    let slope = -params.tau * s_star_price_derivative(params, p)?;
    let partials = design_partials(params, design, q, p)?;
    let margin = p - params.cost;
    let gte_pi = demand + margin * slope;
    let bias_pi = margin * partials.bias_demand();
    let estimator_pi = gte_pi - bias_pi;
    let experimental_slope = slope - partials.bias_demand();
    let markup_a = margin / p;
    let modified_markup_b = markup_a * experimental_slope / slope;
    let condition_a = gte_pi >= 0.0;
    let condition_b = estimator_pi <= 0.0;
    Ok(SignClassification {
        price: p,
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
        elasticity: slope * p / demand,
        experimental_elasticity: p * experimental_slope / demand,
    })
}

/// Everything known about one `(design, q, p)` point of a market.
#[derive(Debug, Clone, Serialize)]
pub struct BiasReport {
    pub design: Design,
    pub q: f64,
    pub price: f64,
    pub rho: f64,
    pub lambda: f64,
    pub tau: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub cost: f64,
    pub s_star: f64,
    pub balance_residual: f64,
    pub solver: SolverKind,
    pub demand: f64,
    pub gte_d: f64,
    pub bias_d: f64,
    pub estimator_d: f64,
    pub gte_pi: f64,
    pub bias_pi: f64,
    pub estimator_pi: f64,
    pub d0y: f64,
    pub d1x: f64,
    pub elasticity: f64,
    pub experimental_elasticity: f64,
    pub markup_a: f64,
    pub modified_markup_b: f64,
    pub condition_a: bool,
    pub condition_b: bool,
    pub change_of_sign: bool,
    pub boundary: bool,
    pub region: Region,
    pub gte_pi_per_lambda: f64,
    pub bias_pi_per_lambda: f64,
    pub gte_pi_per_tau: f64,
    pub bias_pi_per_tau: f64,
}

pub fn bias_report(params: &MarketParams, design: Design, q: f64, p: f64) -> Result<BiasReport> {
    let ss = steady_state(params, p)?;
    let partials = design_partials(params, design, q, p)?;
    let c = analytic_classification(params, design, q, p)?;
    Ok(BiasReport {
        design,
        q,
        price: p,
        rho: params.rho,
        lambda: params.lambda,
        tau: params.tau,
        beta: params.beta(),
        epsilon: params.epsilon,
        cost: params.cost,
        s_star: ss.s_star,
        balance_residual: ss.residual,
        solver: ss.solver,
        demand: c.demand,
        gte_d: c.demand_slope,
        bias_d: partials.bias_demand(),
        estimator_d: c.demand_slope - partials.bias_demand(),
        gte_pi: c.gte_pi,
        bias_pi: c.bias_pi,
        estimator_pi: c.estimator_pi,
        d0y: partials.d0y,
        d1x: partials.d1x,
        elasticity: c.elasticity,
        experimental_elasticity: c.experimental_elasticity,
        markup_a: c.markup_a,
        modified_markup_b: c.modified_markup_b,
        condition_a: c.condition_a,
        condition_b: c.condition_b,
        change_of_sign: c.change_of_sign,
        boundary: c.boundary,
        region: c.region(),
        gte_pi_per_lambda: c.gte_pi / params.lambda,
        bias_pi_per_lambda: c.bias_pi / params.lambda,
        gte_pi_per_tau: c.gte_pi / params.tau,
        bias_pi_per_tau: c.bias_pi / params.tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{bias_cr, bias_lr, MeanFieldDemand};
    use crate::numerics::Tolerances;
    use crate::pricing::classify_sign;
    use approx::assert_abs_diff_eq;

    fn worked() -> MarketParams {
        MarketParams::exponential(5.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn worked_instance_report() {
        let r = bias_report(&worked(), Design::Lr, 0.5, 5.0).unwrap();
        assert_abs_diff_eq!(r.gte_pi, -0.301_315_5, epsilon = 1e-6);
        assert_abs_diff_eq!(r.bias_pi, 0.260_991_2, epsilon = 1e-6);
        assert_abs_diff_eq!(r.estimator_pi, -0.562_306_7, epsilon = 1e-6);
        assert_abs_diff_eq!(r.elasticity, -2.236_068, epsilon = 1e-6);
        assert_abs_diff_eq!(r.markup_a, 0.8, epsilon = 1e-15);
        assert!(!r.condition_a && !r.change_of_sign);
        assert_eq!(r.region, Region::CondAFails);
    }

    #[test]
    fn at_cost_gte_is_demand() {
        let r = bias_report(&worked(), Design::Cr, 0.5, 1.0).unwrap();
        assert_eq!(r.gte_pi, r.demand);
        assert_eq!(r.bias_pi, 0.0);
    }

    #[test]
    fn analytic_and_numeric_classification_agree() {
        let tol = Tolerances::default();
        let base = worked();
        for design in Design::BOTH {
            for beta in [0.05, 1.0, 20.0] {
                let params = base.with_beta(beta);
                let sys = MeanFieldDemand::new(params.clone(), design);
                for p in [1.5, 3.0, 5.0, 7.0] {
                    let a = analytic_classification(&params, design, 0.3, p).unwrap();
                    let n = classify_sign(&sys, p, 0.3, &tol).unwrap();
                    assert_abs_diff_eq!(a.gte_pi, n.gte_pi, epsilon = 1e-7);
                    assert_abs_diff_eq!(a.bias_pi, n.bias_pi, epsilon = 1e-7);
                    assert!(
                        (a.modified_markup_b - n.modified_markup_b).abs() <= 1e-6 * a.modified_markup_b.abs().max(1.0)
                    );
                    let closed = match design {
                        Design::Lr => bias_lr(&params, p).unwrap(),
                        Design::Cr => bias_cr(&params, p).unwrap(),
                    };
                    assert_abs_diff_eq!(a.bias_pi, closed, epsilon = 1e-12);
                }
            }
        }
    }
}

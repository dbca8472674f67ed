//! Conformance suite for one market: valuation and demand assumptions, the
//! bias identity, underestimation, markup ordering, q-independence and
//! analytic derivatives against finite differences.

use pricelab_core::bias::decompose;
use pricelab_core::meanfield::{
    bias_cr, bias_lr, check_valuation, cr_cross_partials, cr_demands, demand, demand_price_derivative,
    lr_cross_partials, lr_demands, s_star_price_derivative, steady_state, CrossPartials, MeanFieldDemand,
};
use pricelab_core::numerics::central_diff_richardson;
use pricelab_core::pricing::{check_demand_assumptions, classify_sign, linspace, ProfitMetrics};
use pricelab_core::{Design, MarketParams, Tolerances};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub prices: Vec<f64>,
    pub betas: Vec<f64>,
    pub identity_tol: f64,
    pub properties: Vec<PropertyResult>,
    pub passed: bool,
}

const QS: [f64; 3] = [0.25, 0.5, 0.75];

/// Prices strictly inside `(c, min(c + 9, ceiling))`, kept away from both
/// ends so that finite-difference stencils stay in the domain.
pub fn price_grid(params: &MarketParams) -> Vec<f64> {
    let c = params.cost;
    let hi = (c + 9.0).min(c + 0.9 * (params.valuation.price_ceiling() - c));
    linspace(c + 0.05 * (hi - c), hi, 9)
}

fn result(name: &str, passed: bool, detail: String) -> PropertyResult {
    PropertyResult { name: name.to_string(), passed, detail }
}

/// Worst value of a per-point measure; an evaluation error fails the
/// property and is reported.
fn worst<F>(points: &[(f64, f64)], mut measure: F) -> Result<f64, String>
where
    F: FnMut(f64, f64) -> pricelab_core::Result<f64>,
{
    let mut worst: f64 = f64::NEG_INFINITY;
    for &(p, beta) in points {
        let m = measure(p, beta).map_err(|e| format!("p = {p}, beta = {beta}: {e}"))?;
        worst = worst.max(if m.is_nan() { f64::INFINITY } else { m });
    }
    Ok(worst)
}

fn bounded(name: &str, measured: Result<f64, String>, limit: f64, what: &str) -> PropertyResult {
    match measured {
        Ok(m) => result(name, m <= limit, format!("max {what} {m:.3e} (limit {limit:e})")),
        Err(e) => result(name, false, e),
    }
}

fn partials(params: &MarketParams, design: Design, q: f64, p: f64) -> pricelab_core::Result<CrossPartials> {
    match design {
        Design::Lr => lr_cross_partials(params, q, p),
        Design::Cr => cr_cross_partials(params, q, p),
    }
}

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / fd.abs().max(1e-8)
}

pub fn run_checks(params: &MarketParams, tol: &Tolerances, identity_tol: f64) -> CheckReport {
    let prices = price_grid(params);
    let b = params.beta();
    let betas = vec![b / 10.0, b, b * 10.0];
    let points: Vec<(f64, f64)> = betas.iter().flat_map(|&beta| prices.iter().map(move |&p| (p, beta))).collect();
    let at = |beta: f64| params.with_beta(beta);
    let (lo, hi) = (prices[0], prices[prices.len() - 1]);
    let mut out = Vec::new();

    let val = check_valuation(&params.valuation, params.cost, hi, 65);
    let range = format!("on [{:.6}, {hi}]", val.price_lo);
    out.push(result("valuation_positive", val.positive, range.clone()));
    out.push(result("valuation_strictly_decreasing", val.strictly_decreasing, range.clone()));
    out.push(result("valuation_derivative_consistent", val.differentiable, range.clone()));
    out.push(result("failure_rate_increasing", val.failure_rate_increasing, format!("-(p - c) v'/v {range}")));

    for design in Design::BOTH {
        let mut bad = Vec::new();
        for &beta in &betas {
            let sys = MeanFieldDemand::new(at(beta), design);
            let r = check_demand_assumptions(&sys, lo, hi, prices.len(), &QS, tol);
            if !r.all_hold() {
                bad.push(format!("beta = {beta}: {r:?}"));
            }
        }
        let name = format!("demand_assumptions_{design}");
        let detail = if bad.is_empty() { format!("{} betas, q in {QS:?}", betas.len()) } else { bad.join("; ") };
        out.push(result(&name, bad.is_empty(), detail));
    }

    out.push(bounded(
        "balance_residual",
        worst(&points, |p, beta| Ok(steady_state(&at(beta), p)?.residual.abs())),
        1e-10,
        "|residual|",
    ));

    for design in Design::BOTH {
        let measured = worst(&points, |p, beta| {
            let sys = ProfitMetrics(MeanFieldDemand::new(at(beta), design));
            let mut m: f64 = 0.0;
            for q in QS {
                m = m.max(decompose(&sys, p, q, tol)?.identity_residual().abs());
            }
            Ok(m)
        });
        out.push(bounded(&format!("bias_identity_{design}"), measured, identity_tol, "|gte - estimator - bias|"));
    }

    out.push(bounded(
        "underestimation",
        worst(&points, |p, beta| {
            let m = at(beta);
            let mut lowest = bias_lr(&m, p)?.min(bias_cr(&m, p)?);
            for design in Design::BOTH {
                for q in QS {
                    lowest = lowest.min(partials(&m, design, q, p)?.bias_demand());
                }
            }
            Ok(-lowest)
        }),
        1e-9,
        "-bias",
    ));

    // A step well above round-off: near-flat demand would otherwise turn
    // 1e-10 differencing noise into visible A > B.
    let fd_tol = Tolerances { fd_step: 1e-4, ..*tol };
    out.push(bounded(
        "markup_order",
        worst(&points, |p, beta| {
            let mut m = f64::NEG_INFINITY;
            for design in Design::BOTH {
                let sys = MeanFieldDemand::new(at(beta), design);
                for q in QS {
                    let c = classify_sign(&sys, p, q, &fd_tol)?;
                    m = m.max(c.markup_a - c.modified_markup_b);
                }
            }
            Ok(m)
        }),
        1e-9,
        "A - B",
    ));

    out.push(bounded(
        "q_independence",
        worst(&points, |p, beta| {
            let m = at(beta);
            let mut spread: f64 = 0.0;
            for design in Design::BOTH {
                let biases = (1..10)
                    .map(|k| Ok((p - m.cost) * partials(&m, design, k as f64 / 10.0, p)?.bias_demand()))
                    .collect::<pricelab_core::Result<Vec<f64>>>()?;
                let lo = biases.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = biases.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                spread = spread.max(hi - lo);
            }
            Ok(spread)
        }),
        1e-8,
        "bias spread over q",
    ));

    out.push(bounded(
        "analytic_vs_fd",
        worst(&points, |p, beta| {
            let m = at(beta);
            let fd = |f: &dyn Fn(f64) -> f64, h: f64| central_diff_richardson(f, p, h);
            let s = |x: f64| steady_state(&m, x).map(|ss| ss.s_star).unwrap_or(f64::NAN);
            let d = |x: f64| demand(&m, x).unwrap_or(f64::NAN);
            let mut e = rel_err(s_star_price_derivative(&m, p)?, fd(&s, 1e-3)?);
            e = e.max(rel_err(demand_price_derivative(&m, p)?, fd(&d, 1e-3)?));
            let q = 0.35;
            let lr = lr_cross_partials(&m, q, p)?;
            let cr = cr_cross_partials(&m, q, p)?;
            let lr0 = |y: f64| lr_demands(&m, q, p, y).map(|d| d.0).unwrap_or(f64::NAN);
            let lr1 = |x: f64| lr_demands(&m, q, x, p).map(|d| d.1).unwrap_or(f64::NAN);
            let cr0 = |y: f64| cr_demands(&m, q, p, y).map(|d| d.0).unwrap_or(f64::NAN);
            let cr1 = |x: f64| cr_demands(&m, q, x, p).map(|d| d.1).unwrap_or(f64::NAN);
            e = e.max(rel_err(lr.d0y, fd(&lr0, 2e-2)?));
            e = e.max(rel_err(lr.d1x, fd(&lr1, 2e-2)?));
            e = e.max(rel_err(cr.d0y, fd(&cr0, 2e-2)?));
            e = e.max(rel_err(cr.d1x, fd(&cr1, 2e-2)?));
            Ok(e)
        }),
        1e-5,
        "relative error",
    ));

    let passed = out.iter().all(|r| r.passed);
    CheckReport { prices, betas, identity_tol, properties: out, passed }
}

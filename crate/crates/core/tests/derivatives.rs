//! Analytic derivatives against finite differences of independently solved
//! steady states on a (p, beta) grid.

use pricelab_core::meanfield::{
    closed_form_s_star, cr_cross_partials, cr_demands, demand, demand_price_derivative, lr_cross_partials, lr_demands,
    s_star_price_derivative,
};
use pricelab_core::numerics::central_diff_richardson;
use pricelab_core::pricing::linspace;
use pricelab_core::MarketParams;

fn instance() -> MarketParams {
    MarketParams::exponential(5.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap()
}

/// Bisection on the global balance equation.
fn bisect(params: &MarketParams, p: f64) -> f64 {
    let v = params.valuation.value(p);
    let flow = |s: f64| (params.rho - s) * params.tau - params.lambda * s * v / (params.epsilon + s * v);
    let (mut lo, mut hi) = (0.0, params.rho);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if flow(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn close(analytic: f64, fd: f64, rel: f64) -> bool {
    (analytic - fd).abs() <= rel * fd.abs().max(1e-8)
}

fn grid() -> impl Iterator<Item = (f64, f64)> {
    let prices = linspace(1.2, 9.0, 10);
    let betas: Vec<f64> = linspace(-1.5, 1.5, 10).iter().map(|e| 10f64.powf(*e)).collect();
    prices.into_iter().flat_map(move |p| betas.clone().into_iter().map(move |b| (p, b)))
}

#[test]
fn closed_form_matches_bisection() {
    for (p, beta) in grid() {
        let params = instance().with_beta(beta);
        let v = params.valuation.value(p);
        let s = closed_form_s_star(&params, v);
        assert!((s - bisect(&params, p)).abs() <= 1e-12, "p={p} beta={beta}");
    }
}

#[test]
fn price_derivatives_match_differences() {
    for (p, beta) in grid() {
        let params = instance().with_beta(beta);
        let fd = central_diff_richardson(|x| bisect(&params, x), p, 1e-3).unwrap();
        let sp = s_star_price_derivative(&params, p).unwrap();
        assert!(close(sp, fd, 1e-6), "s_p at p={p} beta={beta}: {sp} vs {fd}");
        let fd = central_diff_richardson(|x| demand(&params, x).unwrap(), p, 1e-3).unwrap();
        let dp = demand_price_derivative(&params, p).unwrap();
        assert!(close(dp, fd, 1e-6), "D' at p={p} beta={beta}");
    }
}

#[test]
fn cross_partials_match_differences() {
    let q = 0.35;
    for (p, beta) in grid() {
        let params = instance().with_beta(beta);
        let lr = lr_cross_partials(&params, q, p).unwrap();
        let d0y = central_diff_richardson(|y| lr_demands(&params, q, p, y).unwrap().0, p, 2e-2).unwrap();
        let d1x = central_diff_richardson(|x| lr_demands(&params, q, x, p).unwrap().1, p, 2e-2).unwrap();
        assert!(close(lr.d0y, d0y, 1e-5), "LR D0y p={p} beta={beta}: {} vs {d0y}", lr.d0y);
        assert!(close(lr.d1x, d1x, 1e-5), "LR D1x p={p} beta={beta}: {} vs {d1x}", lr.d1x);
        let cr = cr_cross_partials(&params, q, p).unwrap();
        let d0y = central_diff_richardson(|y| cr_demands(&params, q, p, y).unwrap().0, p, 2e-2).unwrap();
        let d1x = central_diff_richardson(|x| cr_demands(&params, q, x, p).unwrap().1, p, 2e-2).unwrap();
        assert!(close(cr.d0y, d0y, 1e-5), "CR D0y p={p} beta={beta}: {} vs {d0y}", cr.d0y);
        assert!(close(cr.d1x, d1x, 1e-5), "CR D1x p={p} beta={beta}: {} vs {d1x}", cr.d1x);
    }
}

//! The bias identity on the mean-field market, computed only through the
//! generic metric-system machinery (finite differences throughout), and
//! cross-checked against the closed forms.

use approx::assert_abs_diff_eq;
use pricelab_core::bias::{check_assumption3, decompose, Swapped};
use pricelab_core::meanfield::{bias_cr, bias_lr, gte_profit_mf, MeanFieldDemand};
use pricelab_core::pricing::{check_demand_assumptions, linspace, DemandMetrics, ProfitMetrics};
use pricelab_core::{Design, MarketParams, Tolerances};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance() -> MarketParams {
    MarketParams::exponential(5.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap()
}

#[test]
fn worked_instance_decomposition() {
    let tol = Tolerances::default();
    let sys = ProfitMetrics(MeanFieldDemand::new(instance(), Design::Lr));
    let d = decompose(&sys, 5.0, 0.5, &tol).unwrap();
    assert_abs_diff_eq!(d.gte, -0.301_31, epsilon = 1e-4);
    assert_abs_diff_eq!(d.bias, 0.260_99, epsilon = 1e-3);
    assert_abs_diff_eq!(d.estimator, -0.562_30, epsilon = 1e-3);
    assert!(d.identity_residual().abs() <= 1e-8);

    let demand = DemandMetrics(MeanFieldDemand::new(instance(), Design::Lr));
    let d = decompose(&demand, 5.0, 0.5, &tol).unwrap();
    assert_abs_diff_eq!(d.gte, -0.170_820, epsilon = 1e-6);
    assert_abs_diff_eq!(d.bias, 0.065_247_8, epsilon = 3e-4);
}

#[test]
fn identity_at_random_points_matches_closed_forms() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let p = rng.random_range(1.0..10.0);
        let beta = 10f64.powf(rng.random_range(-2.0..2.0));
        let q = rng.random_range(0.1..0.9);
        let params = instance().with_beta(beta);
        for design in Design::BOTH {
            let sys = ProfitMetrics(MeanFieldDemand::new(params.clone(), design));
            let d = decompose(&sys, p, q, &tol).unwrap();
            assert!(d.identity_residual().abs() <= 1e-6, "{design} p={p} beta={beta} q={q}");
            let closed = match design {
                Design::Lr => bias_lr(&params, p).unwrap(),
                Design::Cr => bias_cr(&params, p).unwrap(),
            };
            let scale = closed.abs().max(1e-3);
            assert!((d.bias - closed).abs() <= 1e-5 * scale, "{design} bias {} vs {closed}", d.bias);
            assert_abs_diff_eq!(d.gte, gte_profit_mf(&params, p).unwrap(), epsilon = 1e-6);
        }
    }
}

#[test]
fn mean_field_systems_are_consistent() {
    let prices = linspace(1.0, 10.0, 12);
    let qs = [0.1, 0.3, 0.5, 0.7, 0.9];
    for design in Design::BOTH {
        let sys = ProfitMetrics(MeanFieldDemand::new(instance(), design));
        let report = check_assumption3(&sys, &prices, &qs);
        assert!(report.max_residual() <= 1e-9, "{design}: {report:?}");
    }
}

#[test]
fn mean_field_demands_satisfy_assumptions() {
    for beta in [0.1, 1.0, 10.0] {
        for design in Design::BOTH {
            let sys = MeanFieldDemand::new(instance().with_beta(beta), design);
            let report = check_demand_assumptions(&sys, 1.0, 9.0, 9, &[0.25, 0.5, 0.75], &Tolerances::default());
            assert!(report.all_hold(), "{design} beta={beta}: {report:?}");
        }
    }
}

#[test]
fn swapping_groups_mirrors_the_fraction() {
    let tol = Tolerances::default();
    for design in Design::BOTH {
        let sys = ProfitMetrics(MeanFieldDemand::new(instance(), design));
        let direct = decompose(&sys, 4.0, 0.3, &tol).unwrap();
        let swapped = decompose(&Swapped(&sys), 4.0, 0.7, &tol).unwrap();
        assert_abs_diff_eq!(direct.gte, swapped.gte, epsilon = 1e-9);
        assert_abs_diff_eq!(direct.bias, swapped.bias, epsilon = 1e-6);
    }
}

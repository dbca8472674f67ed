//! Statistical checks of the finite-market simulator against the mean-field
//! model. Horizons are kept short enough for a single core.

use pricelab_core::meanfield::{gte_profit_mf, steady_state};
use pricelab_core::sim::{estimate_naive, mean_field_prediction, simulate, SimConfig, SimDesign};
use pricelab_core::MarketParams;

fn config(n_listings: usize, horizon: f64, replications: usize, seed: u64) -> SimConfig {
    SimConfig {
        n_listings,
        params: MarketParams::exponential(5.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap(),
        design: SimDesign::Global,
        q: 0.5,
        p0: 5.0,
        p1: None,
        horizon,
        burn_in: None,
        replications,
        seed,
    }
}

#[test]
fn availability_approaches_mean_field_as_market_grows() {
    let target = steady_state(&config(100, 1.0, 1, 0).params, 5.0).unwrap().s_star;
    let runs: Vec<(f64, f64)> = [(100, 5000.0), (500, 2000.0), (2000, 1000.0)]
        .iter()
        .map(|&(n, horizon)| {
            let out = simulate(&config(n, horizon, 20, 3)).unwrap();
            // 1.96 sigma -> sigma
            let sigma = out.availability_ci_halfwidth.unwrap() / 2.093;
            ((out.availability_fraction - target).abs(), sigma)
        })
        .collect();
    for w in runs.windows(2) {
        let ((big_err, big_sigma), (small_err, small_sigma)) = (w[0], w[1]);
        assert!(small_err <= big_err + 3.0 * big_sigma.hypot(small_sigma), "{runs:?}");
    }
    let (err, sigma) = runs[2];
    assert!(err <= 3.0 * sigma + 1e-4, "{runs:?}");
}

#[test]
fn replication_intervals_cover_reference() {
    let reference = simulate(&config(2000, 2000.0, 8, 1000)).unwrap().availability_fraction;
    let covered = (0..20)
        .filter(|&trial| {
            let out = simulate(&config(2000, 150.0, 5, trial)).unwrap();
            (out.availability_fraction - reference).abs() <= out.availability_ci_halfwidth.unwrap()
        })
        .count();
    assert!(covered >= 18, "covered {covered}/20");
}

#[test]
fn booking_rate_matches_demand() {
    let cfg = config(500, 2000.0, 10, 9);
    let out = simulate(&cfg).unwrap();
    let pred = mean_field_prediction(&cfg).unwrap();
    assert!((out.booking_rate[0] - pred.scaled_demand[0]).abs() <= 0.01 * pred.scaled_demand[0]);
}

#[test]
fn lr_estimator_tracks_finite_difference_prediction() {
    let cfg = SimConfig { design: SimDesign::Lr, p1: Some(5.1), ..config(500, 2000.0, 10, 21) };
    let out = estimate_naive(&cfg).unwrap();
    let pred = mean_field_prediction(&cfg).unwrap().naive_estimator.unwrap();
    let est = out.naive_estimator_hat.unwrap();
    assert!((est - pred).abs() <= out.ci_halfwidth.unwrap() * 1.5, "{est} vs {pred}");
}

#[test]
fn weak_interference_estimator_is_close_to_gte() {
    // With a dominant outside option the logit denominators barely depend on
    // availability, so the two listing groups hardly compete for customers.
    let mut cfg = config(50, 1000.0, 10, 4);
    cfg.params.epsilon = 100.0;
    cfg.params.lambda = 100.0;
    cfg.design = SimDesign::Lr;
    cfg.p1 = Some(5.2);
    let out = estimate_naive(&cfg).unwrap();
    let gte = gte_profit_mf(&cfg.params, 5.1).unwrap();
    let est = out.naive_estimator_hat.unwrap();
    assert!((est - gte).abs() <= out.ci_halfwidth.unwrap() + 0.05 * gte.abs(), "{est} vs {gte}");
}

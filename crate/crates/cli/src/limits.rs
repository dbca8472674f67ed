//! Normalized GTE and biases along a market-balance ladder, next to their
//! `beta -> 0` and `beta -> infinity` limits.

use pricelab_core::meanfield::{bias_cr, bias_lr, gte_profit_mf, limit_values, LimitValues};
use pricelab_core::MarketParams;
use serde::Serialize;

use crate::error::CliResult;

pub fn default_ladder() -> Vec<f64> {
    (-4..=4).map(|k| 10f64.powi(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderRow {
    pub beta: f64,
    pub lambda: f64,
    pub tau: f64,
    pub gte_per_lambda: f64,
    pub bias_lr_per_lambda: f64,
    pub bias_cr_per_lambda: f64,
    pub gte_per_tau: f64,
    pub bias_lr_per_tau: f64,
    pub bias_cr_per_tau: f64,
    pub gap_gte0: f64,
    pub gap_bias_lr0: f64,
    pub gap_bias_cr0: f64,
    pub gap_gte_inf: f64,
    pub gap_bias_lr_inf: f64,
    pub gap_bias_cr_inf: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitsReport {
    pub price: f64,
    pub params: MarketParams,
    pub targets: LimitValues,
    pub ladder: Vec<LadderRow>,
}

/// Relative distance to a target, absolute when the target is zero.
pub fn gap(value: f64, target: f64) -> f64 {
    if target == 0.0 {
        value.abs()
    } else {
        (value - target).abs() / target.abs()
    }
}

/// `tau` stays fixed along the ladder; `lambda = beta tau`.
pub fn limits_report(params: &MarketParams, p: f64, betas: &[f64]) -> CliResult<LimitsReport> {
    params.validate()?;
    let targets = limit_values(params, p);
    let mut ladder = Vec::with_capacity(betas.len());
    for &beta in betas {
        let m = params.with_beta(beta);
        m.validate()?;
        let (gte, lr, cr) = (gte_profit_mf(&m, p)?, bias_lr(&m, p)?, bias_cr(&m, p)?);
        let (per_l, per_t) = (1.0 / m.lambda, 1.0 / m.tau);
        ladder.push(LadderRow {
            beta,
            lambda: m.lambda,
            tau: m.tau,
            gte_per_lambda: gte * per_l,
            bias_lr_per_lambda: lr * per_l,
            bias_cr_per_lambda: cr * per_l,
            gte_per_tau: gte * per_t,
            bias_lr_per_tau: lr * per_t,
            bias_cr_per_tau: cr * per_t,
            gap_gte0: gap(gte * per_l, targets.gte0),
            gap_bias_lr0: gap(lr * per_l, targets.bias_lr0),
            gap_bias_cr0: gap(cr * per_l, targets.bias_cr0),
            gap_gte_inf: gap(gte * per_t, targets.gte_inf),
            gap_bias_lr_inf: gap(lr * per_t, targets.bias_lr_inf),
            gap_bias_cr_inf: gap(cr * per_t, targets.bias_cr_inf),
        });
    }
    Ok(LimitsReport { price: p, params: params.clone(), targets, ladder })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_params;

    #[test]
    fn gaps_shrink_toward_both_ends() {
        let down = limits_report(&default_params(), 5.0, &[1.0, 1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        assert_eq!(down.targets.bias_lr0, 1.0);
        let gaps: Vec<f64> = down.ladder.iter().map(|r| r.gap_bias_lr0).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        assert!(gaps[4] < 0.01);

        let up = limits_report(&default_params(), 5.0, &[1.0, 10.0, 100.0, 1e3, 1e4]).unwrap();
        assert_eq!(up.targets.bias_cr_inf, 4.0);
        let gaps: Vec<f64> = up.ladder.iter().map(|r| r.gap_bias_cr_inf).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        assert!(gaps[4] < 0.01);
    }

    #[test]
    fn margin_targets_vanish_at_cost() {
        let r = limits_report(&default_params(), 1.0, &default_ladder()).unwrap();
        assert_eq!(r.targets.bias_lr0, 0.0);
        assert_eq!(r.targets.bias_cr_inf, 0.0);
        assert!(r.ladder.iter().all(|row| row.bias_lr_per_lambda == 0.0 && row.bias_cr_per_tau == 0.0));
    }

    #[test]
    fn bad_ladder_rejected() {
        assert!(limits_report(&default_params(), 5.0, &[0.0]).is_err());
    }
}

//! Finite-market stochastic simulation of the two-sided market.
//!
//! `N` listings each carry mass `rho / N`. Customers arrive as a Poisson
//! process at rate `lambda N / rho`, so that booked *mass* per unit time
//! matches the mean-field rate `lambda q(s)` with `s = k rho / N` for `k`
//! available listings. Each booked listing frees up after an exponential
//! time with rate `tau`. The chain is simulated exactly (Gillespie direct
//! method) and all rates are reported per unit of listing mass, so they are
//! directly comparable to the mean-field demands.
//!
//! Replications use independent ChaCha8 streams keyed by
//! `(seed, replication index)` and run in parallel; results are gathered in
//! replication order, so outcomes are bit-identical for a fixed
//! configuration regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{check_fraction, Error, Result};
use crate::meanfield::{cr_demands, cr_steady_state, demand, lr_demands, lr_steady_state, steady_state, MarketParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimDesign {
    /// Every listing at `p0`; no experiment.
    Global,
    Lr,
    Cr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_listings: usize,
    pub params: MarketParams,
    pub design: SimDesign,
    /// Treated fraction of listings (LR) or customers (CR).
    #[serde(default = "default_q")]
    pub q: f64,
    pub p0: f64,
    /// Treatment price; ignored by the global design.
    #[serde(default)]
    pub p1: Option<f64>,
    pub horizon: f64,
    /// Defaults to `10 / min(tau, lambda)`.
    #[serde(default)]
    pub burn_in: Option<f64>,
    pub replications: usize,
    pub seed: u64,
}

fn default_q() -> f64 {
    0.5
}

impl SimConfig {
    pub fn burn_in(&self) -> f64 {
        self.burn_in.unwrap_or_else(|| {
            let (lambda, tau) = (self.params.lambda, self.params.tau);
            let slowest = if lambda > 0.0 { lambda.min(tau) } else { tau };
            10.0 / slowest
        })
    }

    pub fn treatment_price(&self) -> f64 {
        self.p1.unwrap_or(self.p0)
    }

    /// Listings per group: `[all]` for global and CR, `[control, treatment]`
    /// for LR.
    pub fn group_sizes(&self) -> Vec<usize> {
        match self.design {
            SimDesign::Global | SimDesign::Cr => vec![self.n_listings],
            SimDesign::Lr => {
                let treated = (self.q * self.n_listings as f64).round() as usize;
                vec![self.n_listings - treated, treated]
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        let p = &self.params;
        if self.n_listings < 10 {
            return invalid(format!("n_listings must be >= 10, got {}", self.n_listings));
        }
        for (name, value) in [("rho", p.rho), ("tau", p.tau), ("epsilon", p.epsilon)] {
            if !(value > 0.0 && value.is_finite()) {
                return invalid(format!("params.{name} must be > 0, got {value}"));
            }
        }
        if !(p.lambda >= 0.0 && p.lambda.is_finite()) {
            return invalid(format!("params.lambda must be >= 0, got {}", p.lambda));
        }
        if !(p.cost >= 0.0) {
            return invalid(format!("params.cost must be >= 0, got {}", p.cost));
        }
        p.valuation.validate()?;
        let burn_in = self.burn_in();
        if !(burn_in >= 0.0 && self.horizon > burn_in && self.horizon.is_finite()) {
            return invalid(format!("need horizon > burn_in >= 0, got horizon {} and burn_in {burn_in}", self.horizon));
        }
        if self.replications == 0 {
            return invalid("replications must be >= 1".into());
        }
        if self.design != SimDesign::Global {
            check_fraction(self.q)?;
        }
        if self.design == SimDesign::Lr && self.group_sizes().contains(&0) {
            return invalid(format!("q = {} leaves an empty group with {} listings", self.q, self.n_listings));
        }
        for price in [self.p0, self.treatment_price()] {
            if price < p.cost {
                return Err(Error::PriceBelowCost { price, cost: p.cost });
            }
            p.valuation.check_at(price)?;
        }
        Ok(())
    }
}

/// One trajectory's time averages and event counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationOutcome {
    pub replication: usize,
    /// Time-averaged available listings per group (a single pool for the
    /// global and CR designs).
    pub mean_available: Vec<f64>,
    pub availability_fraction: f64,
    /// Booked mass per unit time, per booking group (listing group for LR,
    /// customer group for CR).
    pub booking_rate: Vec<f64>,
    /// `booking_rate` divided by group fraction; the scaled demands.
    pub scaled_demand: Vec<f64>,
    pub naive_estimator: Option<f64>,
    pub events: u64,
    pub bookings: u64,
    pub releases: u64,
    pub final_occupied: u64,
}

/// Replication averages with 95% Student-t confidence half-widths. The
/// half-widths are `None` with a single replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutcome {
    pub design: SimDesign,
    pub replication_count: usize,
    pub group_sizes: Vec<usize>,
    pub mean_available: Vec<f64>,
    pub availability_fraction: f64,
    pub availability_ci_halfwidth: Option<f64>,
    pub booking_rate: Vec<f64>,
    pub scaled_demand: Vec<f64>,
    pub naive_estimator_hat: Option<f64>,
    pub ci_halfwidth: Option<f64>,
    pub replications: Vec<ReplicationOutcome>,
}

struct Market {
    sizes: Vec<usize>,
    values: [f64; 2],
    unit_mass: f64,
}

impl Market {
    fn mass(&self, available: u64) -> f64 {
        available as f64 * self.unit_mass
    }
}

fn run_replication(cfg: &SimConfig, replication: usize) -> ReplicationOutcome {
    let p = &cfg.params;
    let market = Market {
        sizes: cfg.group_sizes(),
        values: [p.valuation.value(cfg.p0), p.valuation.value(cfg.treatment_price())],
        unit_mass: p.rho / cfg.n_listings as f64,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(replication as u64);

    let groups = market.sizes.len();
    let booking_groups = if cfg.design == SimDesign::Global { 1 } else { 2 };
    let mut available: Vec<u64> = market.sizes.iter().map(|&n| n as u64).collect();
    let mut area = vec![0.0; groups];
    let mut booked_after_burn_in = vec![0u64; booking_groups];
    let (mut bookings, mut releases, mut events) = (0u64, 0u64, 0u64);

    let burn_in = cfg.burn_in();
    let arrival_rate = p.lambda / market.unit_mass;
    let eps = p.epsilon;
    let mut t = 0.0;
    loop {
        let occupied: u64 = market.sizes.iter().zip(&available).map(|(&n, &k)| n as u64 - k).sum();
        let release_rate = p.tau * occupied as f64;
        let total = arrival_rate + release_rate;
        let dt = if total > 0.0 { rng.sample::<f64, _>(Exp1) / total } else { f64::INFINITY };
        let next = (t + dt).min(cfg.horizon);
        if next > burn_in {
            let start = t.max(burn_in);
            for (a, &k) in area.iter_mut().zip(&available) {
                *a += k as f64 * (next - start);
            }
        }
        if t + dt >= cfg.horizon {
            break;
        }
        t += dt;
        events += 1;

        if rng.random::<f64>() * total < arrival_rate {
            // arrival: which group (if any) gets booked
            let booked = match cfg.design {
                SimDesign::Global => {
                    let w = market.mass(available[0]) * market.values[0];
                    (rng.random::<f64>() * (eps + w) < w).then_some((0, 0))
                }
                SimDesign::Lr => {
                    let w0 = market.mass(available[0]) * market.values[0];
                    let w1 = market.mass(available[1]) * market.values[1];
                    let u = rng.random::<f64>() * (eps + w0 + w1);
                    if u < w0 {
                        Some((0, 0))
                    } else if u < w0 + w1 {
                        Some((1, 1))
                    } else {
                        None
                    }
                }
                SimDesign::Cr => {
                    let customer = usize::from(rng.random::<f64>() < cfg.q);
                    let w = market.mass(available[0]) * market.values[customer];
                    (rng.random::<f64>() * (eps + w) < w).then_some((0, customer))
                }
            };
            if let Some((group, booking_group)) = booked {
                if available[group] > 0 {
                    available[group] -= 1;
                    bookings += 1;
                    if t > burn_in {
                        booked_after_burn_in[booking_group] += 1;
                    }
                }
            }
        } else {
            // release: pick the group of a uniformly chosen occupied listing
            let mut pick = rng.random_range(0..occupied);
            let mut group = 0;
            for (g, (&n, &k)) in market.sizes.iter().zip(&available).enumerate() {
                let occ = n as u64 - k;
                if pick < occ {
                    group = g;
                    break;
                }
                pick -= occ;
            }
            available[group] += 1;
            releases += 1;
        }
    }

    let window = cfg.horizon - burn_in;
    let mean_available: Vec<f64> = area.iter().map(|a| a / window).collect();
    let availability_fraction = mean_available.iter().sum::<f64>() / cfg.n_listings as f64;
    let booking_rate: Vec<f64> = booked_after_burn_in.iter().map(|&b| b as f64 * market.unit_mass / window).collect();
    let fractions = group_fractions(cfg, &market.sizes);
    let scaled_demand: Vec<f64> = booking_rate.iter().zip(&fractions).map(|(r, f)| r / f).collect();
    let naive_estimator = estimator_from(cfg, &scaled_demand);
    let final_occupied = market.sizes.iter().zip(&available).map(|(&n, &k)| n as u64 - k).sum();
    ReplicationOutcome {
        replication,
        mean_available,
        availability_fraction,
        booking_rate,
        scaled_demand,
        naive_estimator,
        events,
        bookings,
        releases,
        final_occupied,
    }
}

fn group_fractions(cfg: &SimConfig, sizes: &[usize]) -> Vec<f64> {
    match cfg.design {
        SimDesign::Global => vec![1.0],
        SimDesign::Lr => sizes.iter().map(|&n| n as f64 / cfg.n_listings as f64).collect(),
        SimDesign::Cr => vec![1.0 - cfg.q, cfg.q],
    }
}

/// Finite-difference naive profit estimator `(pi1 - pi0) / (p1 - p0)` from
/// scaled demands.
fn estimator_from(cfg: &SimConfig, scaled_demand: &[f64]) -> Option<f64> {
    let (p0, p1) = (cfg.p0, cfg.treatment_price());
    if cfg.design == SimDesign::Global || (p1 - p0).abs() < 1e-9 {
        return None;
    }
    let c = cfg.params.cost;
    Some(((p1 - c) * scaled_demand[1] - (p0 - c) * scaled_demand[0]) / (p1 - p0))
}

/// Mean and 95% half-width of a sample.
pub fn mean_ci(samples: &[f64]) -> (f64, Option<f64>) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).map(|d| d.inverse_cdf(0.975)).unwrap_or(1.96);
    (mean, Some(t * (var / n as f64).sqrt()))
}

fn column_means(rows: impl Iterator<Item = Vec<f64>>, width: usize, count: usize) -> Vec<f64> {
    let mut sums = vec![0.0; width];
    for row in rows {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    sums.iter().map(|s| s / count as f64).collect()
}

/// Runs every replication and aggregates. Degenerate but valid
/// configurations (no arrivals, say) simply produce flat outcomes.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    let replications: Vec<ReplicationOutcome> =
        (0..cfg.replications).into_par_iter().map(|r| run_replication(cfg, r)).collect();
    let n = replications.len();
    let sizes = cfg.group_sizes();
    let fractions: Vec<f64> = replications.iter().map(|r| r.availability_fraction).collect();
    let (availability_fraction, availability_ci_halfwidth) = mean_ci(&fractions);
    let booking_width = replications[0].booking_rate.len();
    let estimators: Vec<f64> = replications.iter().filter_map(|r| r.naive_estimator).collect();
    let (naive_estimator_hat, ci_halfwidth) = if estimators.is_empty() {
        (None, None)
    } else {
        let (m, ci) = mean_ci(&estimators);
        (Some(m), ci)
    };
    Ok(SimOutcome {
        design: cfg.design,
        replication_count: n,
        mean_available: column_means(replications.iter().map(|r| r.mean_available.clone()), sizes.len(), n),
        group_sizes: sizes,
        availability_fraction,
        availability_ci_halfwidth,
        booking_rate: column_means(replications.iter().map(|r| r.booking_rate.clone()), booking_width, n),
        scaled_demand: column_means(replications.iter().map(|r| r.scaled_demand.clone()), booking_width, n),
        naive_estimator_hat,
        ci_halfwidth,
        replications,
    })
}

/// [`simulate`] for an experiment with distinct prices, so the naive
/// estimator is defined.
pub fn estimate_naive(cfg: &SimConfig) -> Result<SimOutcome> {
    let p1 = cfg.treatment_price();
    if cfg.design == SimDesign::Global {
        return Err(Error::InvalidConfig("the naive estimator needs an lr or cr design".into()));
    }
    if (p1 - cfg.p0).abs() < 1e-9 {
        return Err(Error::DegenerateDelta { p0: cfg.p0, p1 });
    }
    simulate(cfg)
}

/// Mean-field counterpart of a simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldPrediction {
    pub availability_fraction: f64,
    pub scaled_demand: Vec<f64>,
    pub naive_estimator: Option<f64>,
}

pub fn mean_field_prediction(cfg: &SimConfig) -> Result<MeanFieldPrediction> {
    let p = &cfg.params;
    let (p0, p1) = (cfg.p0, cfg.treatment_price());
    let (availability_fraction, scaled_demand) = match cfg.design {
        SimDesign::Global => {
            let s = steady_state(p, p0)?.s_star;
            (s / p.rho, vec![demand(p, p0)?])
        }
        SimDesign::Lr => {
            let ss = lr_steady_state(p, cfg.q, p0, p1)?;
            let (d0, d1) = lr_demands(p, cfg.q, p0, p1)?;
            ((ss.s0_star + ss.s1_star) / p.rho, vec![d0, d1])
        }
        SimDesign::Cr => {
            let s = cr_steady_state(p, cfg.q, p0, p1)?.s_star;
            let (d0, d1) = cr_demands(p, cfg.q, p0, p1)?;
            (s / p.rho, vec![d0, d1])
        }
    };
    let naive_estimator = estimator_from(cfg, &scaled_demand);
    Ok(MeanFieldPrediction { availability_fraction, scaled_demand, naive_estimator })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(design: SimDesign) -> SimConfig {
        SimConfig {
            n_listings: 100,
            params: MarketParams::exponential(5.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap(),
            design,
            q: 0.5,
            p0: 5.0,
            p1: Some(5.5),
            horizon: 200.0,
            burn_in: None,
            replications: 3,
            seed: 7,
        }
    }

    #[test]
    fn no_arrivals_keeps_everything_available() {
        let mut cfg = config(SimDesign::Global);
        cfg.params.lambda = 0.0;
        let out = simulate(&cfg).unwrap();
        assert_eq!(out.mean_available, vec![100.0]);
        assert_eq!(out.availability_fraction, 1.0);
        assert_eq!(out.booking_rate, vec![0.0]);
        assert!(out.replications.iter().all(|r| r.events == 0));
    }

    #[test]
    fn bookkeeping_is_exact() {
        for design in [SimDesign::Global, SimDesign::Lr, SimDesign::Cr] {
            let out = simulate(&config(design)).unwrap();
            for r in &out.replications {
                assert_eq!(r.bookings - r.releases, r.final_occupied, "{design:?}");
                assert!(r.bookings + r.releases <= r.events);
                for (avail, &size) in r.mean_available.iter().zip(&out.group_sizes) {
                    assert!(*avail >= 0.0 && *avail <= size as f64);
                }
            }
            assert!(out.availability_ci_halfwidth.unwrap() >= 0.0);
        }
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let cfg = config(SimDesign::Lr);
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&SimConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.replications[0].events, c.replications[0].events);
        // streams differ between replications
        assert_ne!(a.replications[0].events, a.replications[1].events);
    }

    #[test]
    fn single_replication_has_no_interval() {
        let out = simulate(&SimConfig { replications: 1, ..config(SimDesign::Cr) }).unwrap();
        assert_eq!(out.ci_halfwidth, None);
        assert_eq!(out.availability_ci_halfwidth, None);
        assert!(out.naive_estimator_hat.is_some());
    }

    #[test]
    fn config_validation() {
        assert!(matches!(
            simulate(&SimConfig { n_listings: 5, ..config(SimDesign::Global) }),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            simulate(&SimConfig { horizon: 5.0, ..config(SimDesign::Global) }),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            simulate(&SimConfig { replications: 0, ..config(SimDesign::Global) }),
            Err(Error::InvalidConfig(_))
        ));
        assert!(simulate(&SimConfig { q: 1.0, ..config(SimDesign::Lr) }).is_err());
        assert!(matches!(
            estimate_naive(&SimConfig { p1: Some(5.0), ..config(SimDesign::Lr) }),
            Err(Error::DegenerateDelta { .. })
        ));
        assert!(estimate_naive(&config(SimDesign::Global)).is_err());
    }

    #[test]
    fn mean_ci_basics() {
        let (m, ci) = mean_ci(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        // t_{0.975, 2} = 4.302653
        assert!((ci.unwrap() - 4.302_653 / 3f64.sqrt()).abs() < 1e-5);
        assert_eq!(mean_ci(&[4.0]), (4.0, None));
    }

    #[test]
    fn prediction_for_global_matches_steady_state() {
        let pred = mean_field_prediction(&config(SimDesign::Global)).unwrap();
        assert!((pred.availability_fraction - 0.618_034).abs() < 1e-6);
        assert!(pred.naive_estimator.is_none());
        let lr = mean_field_prediction(&config(SimDesign::Lr)).unwrap();
        assert!(lr.naive_estimator.is_some());
    }
}

//! Global treatment effect, naive estimator and interference bias for an
//! abstract experiment.
//!
//! A [`MetricSystem`] pairs a global metric `T(x)` with the experimental
//! metrics `T0(x0, x1, q)` and `T1(x0, x1, q)` of the control and treatment
//! groups, where `x0` is the control decision, `x1` the treatment decision
//! and `q` the treated fraction. Under constant returns
//! (`T0(x, x, q) / (1 - q) = T1(x, x, q) / q = T(x)`) the local naive
//! estimator is `T1y / q - T0y / (1 - q)` and it misses the global effect
//! `T'(x)` by exactly the scaled cross-partials `T0y / (1 - q) + T1x / q`.
//! Subscript `x` is the derivative in the control argument, `y` in the
//! treatment argument, both taken at `x0 = x1`.

use serde::Serialize;

use crate::error::{check_fraction, Error, Result};
use crate::numerics::{derivative, partials, Tolerances};

/// Global and experimental metrics of one experiment.
///
/// Implementations must be pure. Returning a non-finite value signals that
/// the metric cannot be evaluated at that point.
pub trait MetricSystem {
    fn global(&self, x: f64) -> f64;
    fn control(&self, x0: f64, x1: f64, q: f64) -> f64;
    fn treatment(&self, x0: f64, x1: f64, q: f64) -> f64;

    /// Bounds on the decision variable.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

impl<S: MetricSystem + ?Sized> MetricSystem for &S {
    fn global(&self, x: f64) -> f64 {
        (**self).global(x)
    }
    fn control(&self, x0: f64, x1: f64, q: f64) -> f64 {
        (**self).control(x0, x1, q)
    }
    fn treatment(&self, x0: f64, x1: f64, q: f64) -> f64 {
        (**self).treatment(x0, x1, q)
    }
    fn domain(&self) -> (f64, f64) {
        (**self).domain()
    }
}

/// A [`MetricSystem`] assembled from closures.
pub struct FnMetricSystem<G, C, T> {
    pub global: G,
    pub control: C,
    pub treatment: T,
    pub domain: (f64, f64),
}

impl<G, C, T> FnMetricSystem<G, C, T>
where
    G: Fn(f64) -> f64,
    C: Fn(f64, f64, f64) -> f64,
    T: Fn(f64, f64, f64) -> f64,
{
    pub fn new(global: G, control: C, treatment: T) -> Self {
        Self { global, control, treatment, domain: (f64::NEG_INFINITY, f64::INFINITY) }
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }
}

impl<G, C, T> MetricSystem for FnMetricSystem<G, C, T>
where
    G: Fn(f64) -> f64,
    C: Fn(f64, f64, f64) -> f64,
    T: Fn(f64, f64, f64) -> f64,
{
    fn global(&self, x: f64) -> f64 {
        (self.global)(x)
    }
    fn control(&self, x0: f64, x1: f64, q: f64) -> f64 {
        (self.control)(x0, x1, q)
    }
    fn treatment(&self, x0: f64, x1: f64, q: f64) -> f64 {
        (self.treatment)(x0, x1, q)
    }
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// The system with control and treatment relabeled: the new treatment group
/// is the old control group (fraction `1 - q`) and vice versa.
pub struct Swapped<S>(pub S);

impl<S: MetricSystem> MetricSystem for Swapped<S> {
    fn global(&self, x: f64) -> f64 {
        self.0.global(x)
    }
    fn control(&self, x0: f64, x1: f64, q: f64) -> f64 {
        self.0.treatment(x1, x0, 1.0 - q)
    }
    fn treatment(&self, x0: f64, x1: f64, q: f64) -> f64 {
        self.0.control(x1, x0, 1.0 - q)
    }
    fn domain(&self) -> (f64, f64) {
        self.0.domain()
    }
}

/// First partials of both experimental metrics at `x0 = x1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossPartials {
    pub control_x: f64,
    pub control_y: f64,
    pub treatment_x: f64,
    pub treatment_y: f64,
}

impl CrossPartials {
    pub fn estimator(&self, q: f64) -> f64 {
        self.treatment_y / q - self.control_y / (1.0 - q)
    }

    pub fn bias(&self, q: f64) -> f64 {
        self.control_y / (1.0 - q) + self.treatment_x / q
    }
}

/// GTE, estimator and bias evaluated together at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub gte: f64,
    pub estimator: f64,
    pub bias: f64,
}

impl Decomposition {
    /// `gte - estimator - bias`; zero up to differencing error when the
    /// constant-returns consistency holds.
    pub fn identity_residual(&self) -> f64 {
        self.gte - self.estimator - self.bias
    }
}

fn check_interior<S: MetricSystem>(sys: &S, x0: f64) -> Result<()> {
    let (lo, hi) = sys.domain();
    if x0 > lo && x0 < hi {
        Ok(())
    } else {
        Err(Error::OutOfDomain { x: x0, lo, hi })
    }
}

/// `(control, treatment)` consistency residuals at `(x, q)`:
/// `|T0(x,x,q)/(1-q) - T(x)|` and `|T1(x,x,q)/q - T(x)|`.
pub fn consistency_residuals<S: MetricSystem>(sys: &S, x: f64, q: f64) -> (f64, f64) {
    let global = sys.global(x);
    let control = (sys.control(x, x, q) / (1.0 - q) - global).abs();
    let treatment = (sys.treatment(x, x, q) / q - global).abs();
    (control, treatment)
}

fn enforce_consistency<S: MetricSystem>(sys: &S, x0: f64, q: f64, tol: &Tolerances) -> Result<()> {
    let (control, treatment) = consistency_residuals(sys, x0, q);
    let residual = control.max(treatment);
    let scale = sys.global(x0).abs().max(1.0);
    if residual.is_nan() || residual > tol.consistency_tol * scale {
        return Err(Error::ConsistencyViolation { x: x0, q, residual });
    }
    Ok(())
}

/// Global treatment effect `T'(x0)`.
pub fn gte<S: MetricSystem>(sys: &S, x0: f64, tol: &Tolerances) -> Result<f64> {
    check_interior(sys, x0)?;
    Ok(derivative(|x| sys.global(x), x0, tol)?)
}

/// Partials of both experimental metrics at `(x0, x0, q)`, after checking
/// that the consistency condition holds there.
pub fn cross_partials<S: MetricSystem>(sys: &S, x0: f64, q: f64, tol: &Tolerances) -> Result<CrossPartials> {
    check_interior(sys, x0)?;
    check_fraction(q)?;
    enforce_consistency(sys, x0, q, tol)?;
    let (control_x, control_y) = partials(|a, b| sys.control(a, b, q), x0, x0, tol)?;
    let (treatment_x, treatment_y) = partials(|a, b| sys.treatment(a, b, q), x0, x0, tol)?;
    Ok(CrossPartials { control_x, control_y, treatment_x, treatment_y })
}

/// Local naive estimator `T1y/q - T0y/(1-q)`.
pub fn naive_estimator<S: MetricSystem>(sys: &S, x0: f64, q: f64, tol: &Tolerances) -> Result<f64> {
    Ok(cross_partials(sys, x0, q, tol)?.estimator(q))
}

/// Bias of the naive estimator, `T0y/(1-q) + T1x/q`.
pub fn bias<S: MetricSystem>(sys: &S, x0: f64, q: f64, tol: &Tolerances) -> Result<f64> {
    Ok(cross_partials(sys, x0, q, tol)?.bias(q))
}

pub fn decompose<S: MetricSystem>(sys: &S, x0: f64, q: f64, tol: &Tolerances) -> Result<Decomposition> {
    let partials = cross_partials(sys, x0, q, tol)?;
    Ok(Decomposition { gte: gte(sys, x0, tol)?, estimator: partials.estimator(q), bias: partials.bias(q) })
}

/// Largest consistency residuals over a sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub max_control_residual: f64,
    pub max_treatment_residual: f64,
    pub worst_x: f64,
    pub worst_q: f64,
    pub samples: usize,
}

impl ConsistencyReport {
    pub fn max_residual(&self) -> f64 {
        self.max_control_residual.max(self.max_treatment_residual)
    }
}

/// Scans every `(x, q)` pair of the sample grid for constant-returns
/// violations. Never fails; a metric that cannot be evaluated shows up as an
/// infinite residual.
pub fn check_assumption3<S: MetricSystem>(sys: &S, x_samples: &[f64], q_samples: &[f64]) -> ConsistencyReport {
    let mut report = ConsistencyReport {
        max_control_residual: 0.0,
        max_treatment_residual: 0.0,
        worst_x: f64::NAN,
        worst_q: f64::NAN,
        samples: 0,
    };
    let mut worst = -1.0;
    for &x in x_samples {
        for &q in q_samples {
            let (control, treatment) = consistency_residuals(sys, x, q);
            let control = if control.is_nan() { f64::INFINITY } else { control };
            let treatment = if treatment.is_nan() { f64::INFINITY } else { treatment };
            report.max_control_residual = report.max_control_residual.max(control);
            report.max_treatment_residual = report.max_treatment_residual.max(treatment);
            if control.max(treatment) > worst {
                worst = control.max(treatment);
                report.worst_x = x;
                report.worst_q = q;
            }
            report.samples += 1;
        }
    }
    report
}

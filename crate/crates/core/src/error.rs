use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("point {x} outside the domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("price {price} is below marginal cost {cost}")]
    PriceBelowCost { price: f64, cost: f64 },
    #[error("{assumption} violated: {detail}")]
    AssumptionViolation { assumption: &'static str, detail: String },
    #[error("consistency violated at x = {x}, q = {q}: residual {residual:e}")]
    ConsistencyViolation { x: f64, q: f64, residual: f64 },
    #[error("degenerate demand at p = {price}: D = {demand}, D' = {slope}")]
    DegenerateDemand { price: f64, demand: f64, slope: f64 },
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("treatment and control prices coincide ({p0} vs {p1})")]
    DegenerateDelta { p0: f64, p1: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_fraction(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "q", value: q, reason: "treatment fraction must lie in (0, 1)" })
    }
}

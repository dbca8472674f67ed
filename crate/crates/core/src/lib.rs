//! Interference bias of naive A/B price-experiment estimators.
//!
//! The crate is layered bottom-up:
//!
//! * [`numerics`]: bracketed root finding and finite differences.
//! * [`bias`]: global treatment effect, naive estimator and bias for an
//!   arbitrary system of global/control/treatment metrics.
//! * [`pricing`]: demand and profit estimands, markup conditions and the
//!   change-of-sign classification for a demand system.
//! * [`meanfield`]: the homogeneous two-sided market with logit choice,
//!   its steady states under listing- and customer-side randomization, and
//!   closed-form derivatives, biases and limits.
//! * [`sim`]: a finite-market continuous-time simulator of the same market.
//! * [`report`]: one-point summaries combining the layers above.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bias;
pub mod error;
pub mod meanfield;
pub mod numerics;
pub mod pricing;
pub mod report;
pub mod sim;

pub use error::{Error, Result};
pub use meanfield::{Design, MarketParams, Valuation};
pub use numerics::Tolerances;

//! Command-line front end for `pricelab-core`: single-point reports,
//! price by market-balance sweeps, limit ladders, simulator runs and a
//! conformance suite. Output is JSON (one object per command, with a
//! `schema_version`) or CSV (header row, LF endings, 12 significant digits).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod limits;
pub mod simulate;
pub mod sweep;

pub use cli::{run, Cli};
pub use error::{CliError, CliResult};

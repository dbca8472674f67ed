//! Simulator runs with the mean-field prediction alongside.

use std::io::Write;

use pricelab_core::sim::{
    mean_field_prediction, simulate, MeanFieldPrediction, ReplicationOutcome, SimConfig, SimDesign,
};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::format::{format_float, format_opt};

/// [`pricelab_core::sim::SimOutcome`] without the per-replication records,
/// which go to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeSummary {
    pub replication_count: usize,
    pub group_sizes: Vec<usize>,
    pub mean_availability: Vec<f64>,
    pub availability_fraction: f64,
    pub availability_ci_halfwidth: Option<f64>,
    pub booking_rate: Vec<f64>,
    pub scaled_demand: Vec<f64>,
    pub naive_estimator_hat: Option<f64>,
    pub ci_halfwidth: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub config: SimConfig,
    pub outcome: OutcomeSummary,
    /// `None` when the mean-field model is undefined for the configuration
    /// (for example `lambda = 0`).
    pub mean_field: Option<MeanFieldPrediction>,
    #[serde(skip)]
    pub replications: Vec<ReplicationOutcome>,
}

pub fn run_simulation(cfg: &SimConfig) -> CliResult<SimulationReport> {
    let out = simulate(cfg)?;
    let mean_field = if cfg.params.lambda > 0.0 { Some(mean_field_prediction(cfg)?) } else { None };
    Ok(SimulationReport {
        config: cfg.clone(),
        outcome: OutcomeSummary {
            replication_count: out.replication_count,
            group_sizes: out.group_sizes,
            mean_availability: out.mean_available,
            availability_fraction: out.availability_fraction,
            availability_ci_halfwidth: out.availability_ci_halfwidth,
            booking_rate: out.booking_rate,
            scaled_demand: out.scaled_demand,
            naive_estimator_hat: out.naive_estimator_hat,
            ci_halfwidth: out.ci_halfwidth,
        },
        mean_field,
        replications: out.replications,
    })
}

pub const REPLICATION_COLUMNS: [&str; 18] = [
    "replication",
    "availability_fraction",
    "mean_available_0",
    "mean_available_1",
    "booking_rate_0",
    "booking_rate_1",
    "scaled_demand_0",
    "scaled_demand_1",
    "naive_estimator",
    "events",
    "bookings",
    "releases",
    "final_occupied",
    "mf_availability_fraction",
    "mf_scaled_demand_0",
    "mf_scaled_demand_1",
    "mf_naive_estimator",
    "design",
];

/// One row per replication; group columns are empty where a design has a
/// single group.
pub fn write_replications_csv<W: Write>(report: &SimulationReport, writer: W) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(REPLICATION_COLUMNS)?;
    let at = |v: &[f64], i: usize| format_opt(v.get(i).copied());
    let mf = report.mean_field.as_ref();
    let design = match report.config.design {
        SimDesign::Global => "global",
        SimDesign::Lr => "lr",
        SimDesign::Cr => "cr",
    };
    for r in &report.replications {
        w.write_record([
            r.replication.to_string(),
            format_float(r.availability_fraction),
            at(&r.mean_available, 0),
            at(&r.mean_available, 1),
            at(&r.booking_rate, 0),
            at(&r.booking_rate, 1),
            at(&r.scaled_demand, 0),
            at(&r.scaled_demand, 1),
            format_opt(r.naive_estimator),
            r.events.to_string(),
            r.bookings.to_string(),
            r.releases.to_string(),
            r.final_occupied.to_string(),
            format_opt(mf.map(|m| m.availability_fraction)),
            format_opt(mf.and_then(|m| m.scaled_demand.first().copied())),
            format_opt(mf.and_then(|m| m.scaled_demand.get(1).copied())),
            format_opt(mf.and_then(|m| m.naive_estimator)),
            design.to_string(),
        ])?;
    }
    w.flush().map_err(|source| CliError::Io { path: "csv output".into(), source })?;
    Ok(())
}

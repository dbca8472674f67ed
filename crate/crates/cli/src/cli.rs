use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pricelab_core::report::bias_report;
use pricelab_core::sim::{SimConfig, SimDesign};
use pricelab_core::{Design, MarketParams};
use serde::Serialize;

use crate::check::run_checks;
use crate::config::{load_config, ConfigFile, ParamOverrides, SimSection, SCHEMA_VERSION};
use crate::error::{CliError, CliResult};
use crate::limits::{default_ladder, limits_report};
use crate::simulate::{run_simulation, write_replications_csv};
use crate::sweep::{run_sweep, write_csv, Axis, AxisName, DesignChoice, OutputGroup, Scale, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "pricelab", version, about = "Interference bias of naive price experiments in a two-sided market")]
pub struct Cli {
    /// JSON config file (schema_version 1); flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Simulator seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads for sweeps and simulator replications.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Tolerance for the bias identity in `check` (default 1e-6).
    #[arg(long, global = true, value_name = "X")]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady state at one price (full point report).
    Steady(PointArgs),
    /// Global treatment effects at one price (full point report).
    Gte(PointArgs),
    /// Bias decomposition and sign conditions at one price.
    Bias(PointArgs),
    /// CSV grid over price and market balance.
    Sweep(SweepArgs),
    /// Normalized GTE and biases along a market-balance ladder.
    Limits(LimitsArgs),
    /// Finite-market simulation with the mean-field prediction.
    Simulate(SimulateArgs),
    /// Conformance suite; exits with 1 if any property fails.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct MarketArgs {
    /// Listing mass.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Customer arrival rate.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Listing release (unbooking) rate.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Market balance; sets lambda = beta * tau.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Outside-option weight in the logit choice.
    #[arg(long, alias = "epsilon")]
    pub eps: Option<f64>,
    /// Marginal cost.
    #[arg(long = "c", alias = "cost")]
    pub cost: Option<f64>,
    /// Level of the exponential valuation v(p) = exp(V - p).
    #[arg(long = "V")]
    pub level: Option<f64>,
}

impl MarketArgs {
    fn overrides(&self) -> ParamOverrides {
        ParamOverrides {
            rho: self.rho,
            lambda: self.lambda,
            tau: self.tau,
            beta: self.beta,
            epsilon: self.eps,
            cost: self.cost,
            level: self.level,
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct PointArgs {
    #[command(flatten)]
    pub market: MarketArgs,
    #[arg(long)]
    pub p: Option<f64>,
    /// lr or cr (default lr).
    #[arg(long)]
    pub design: Option<Design>,
    /// Treated fraction (default 0.5).
    #[arg(long)]
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct SweepArgs {
    #[command(flatten)]
    pub market: MarketArgs,
    /// lr, cr or both.
    #[arg(long, value_parser = parse_design_choice)]
    pub design: Option<DesignChoice>,
    /// Treated fraction (default 0.5).
    #[arg(long)]
    pub q: Option<f64>,
    /// Lowest price.
    #[arg(long)]
    pub p_lo: Option<f64>,
    /// Highest price.
    #[arg(long)]
    pub p_hi: Option<f64>,
    /// Number of prices.
    #[arg(long)]
    pub p_n: Option<usize>,
    /// lambda (tau fixed) or beta.
    #[arg(long, value_parser = parse_axis_name)]
    pub axis2: Option<AxisName>,
    /// Lowest lambda or beta.
    #[arg(long)]
    pub axis2_lo: Option<f64>,
    /// Highest lambda or beta.
    #[arg(long)]
    pub axis2_hi: Option<f64>,
    /// Number of lambda or beta values.
    #[arg(long)]
    pub axis2_n: Option<usize>,
    /// linear or log.
    #[arg(long, value_parser = parse_scale)]
    pub axis2_scale: Option<Scale>,
    /// Extra column groups: elasticities, normalized.
    #[arg(long, value_delimiter = ',', value_parser = parse_output_group)]
    pub outputs: Option<Vec<OutputGroup>>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct LimitsArgs {
    #[command(flatten)]
    pub market: MarketArgs,
    #[arg(long)]
    pub p: Option<f64>,
    /// Comma-separated beta values (default 1e-4, 1e-3, ..., 1e4).
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub market: MarketArgs,
    /// global, lr or cr.
    #[arg(long, value_parser = parse_sim_design)]
    pub design: Option<SimDesign>,
    /// Number of listings N.
    #[arg(long)]
    pub n_listings: Option<usize>,
    /// Treated fraction (default 0.5).
    #[arg(long)]
    pub q: Option<f64>,
    /// Control (or global) price.
    #[arg(long)]
    pub p0: Option<f64>,
    /// Treatment price; omit for a single price.
    #[arg(long)]
    pub p1: Option<f64>,
    /// Simulated time per replication, burn-in included.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Discarded warm-up time (default 10 / min(lambda, tau)).
    #[arg(long)]
    pub burn_in: Option<f64>,
    /// Independent replications (default 1).
    #[arg(long)]
    pub replications: Option<usize>,
    /// Per-replication CSV; defaults to the --out path with extension csv.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct CheckArgs {
    #[command(flatten)]
    pub market: MarketArgs,
}

fn parse_design_choice(s: &str) -> Result<DesignChoice, String> {
    match s {
        "lr" => Ok(DesignChoice::Lr),
        "cr" => Ok(DesignChoice::Cr),
        "both" => Ok(DesignChoice::Both),
        _ => Err(format!("expected lr, cr or both, got {s:?}")),
    }
}

fn parse_axis_name(s: &str) -> Result<AxisName, String> {
    match s {
        "lambda" => Ok(AxisName::Lambda),
        "beta" => Ok(AxisName::Beta),
        _ => Err(format!("expected lambda or beta, got {s:?}")),
    }
}

fn parse_scale(s: &str) -> Result<Scale, String> {
    match s {
        "linear" => Ok(Scale::Linear),
        "log" => Ok(Scale::Log),
        _ => Err(format!("expected linear or log, got {s:?}")),
    }
}

fn parse_output_group(s: &str) -> Result<OutputGroup, String> {
    match s {
        "gte" => Ok(OutputGroup::Gte),
        "bias" => Ok(OutputGroup::Bias),
        "estimator" => Ok(OutputGroup::Estimator),
        "region" => Ok(OutputGroup::Region),
        "elasticities" => Ok(OutputGroup::Elasticities),
        "normalized" => Ok(OutputGroup::Normalized),
        _ => Err(format!("unknown output group {s:?}")),
    }
}

fn parse_sim_design(s: &str) -> Result<SimDesign, String> {
    match s {
        "global" => Ok(SimDesign::Global),
        "lr" => Ok(SimDesign::Lr),
        "cr" => Ok(SimDesign::Cr),
        _ => Err(format!("expected global, lr or cr, got {s:?}")),
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

pub fn json_output<T: Serialize>(command: &str, body: &T) -> String {
    let mut text = serde_json::to_string_pretty(&Envelope { schema_version: SCHEMA_VERSION, command, body })
        .expect("reports serialize to JSON");
    text.push('\n');
    text
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => {
            std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.display().to_string(), source })
        }
        None => std::io::stdout().write_all(bytes).map_err(|source| CliError::Io { path: "stdout".into(), source }),
    }
}

fn require<T>(value: Option<T>, what: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::input(format!("missing {what}")))
}

/// 64 x 64 grid from cost to cost + 7.5 (capped below a valuation ceiling)
/// by lambda in [1e-2, 1e2].
fn default_sweep(params: &MarketParams) -> SweepSpec {
    let c = params.cost;
    let hi = (c + 7.5).min(c + 0.99 * (params.valuation.price_ceiling() - c));
    SweepSpec {
        axis1: Axis { name: AxisName::P, lo: c, hi, n: 64, scale: Scale::Linear },
        axis2: Axis { name: AxisName::Lambda, lo: 0.01, hi: 100.0, n: 64, scale: Scale::Log },
        design: DesignChoice::Both,
        q: 0.5,
        outputs: Vec::new(),
    }
}

fn sweep_spec(config: &ConfigFile, args: &SweepArgs, params: &MarketParams) -> SweepSpec {
    let mut spec = config.sweep.clone().unwrap_or_else(|| default_sweep(params));
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut spec.axis1.lo, args.p_lo);
    set(&mut spec.axis1.hi, args.p_hi);
    set(&mut spec.axis2.lo, args.axis2_lo);
    set(&mut spec.axis2.hi, args.axis2_hi);
    set(&mut spec.q, args.q);
    if let Some(n) = args.p_n {
        spec.axis1.n = n;
    }
    if let Some(n) = args.axis2_n {
        spec.axis2.n = n;
    }
    if let Some(name) = args.axis2 {
        spec.axis2.name = name;
    }
    if let Some(scale) = args.axis2_scale {
        spec.axis2.scale = scale;
    }
    if let Some(design) = args.design {
        spec.design = design;
    }
    if let Some(outputs) = &args.outputs {
        spec.outputs = outputs.clone();
    }
    spec
}

fn sim_config(cli: &Cli, config: &ConfigFile, args: &SimulateArgs) -> CliResult<SimConfig> {
    let file = config.simulate.clone().unwrap_or_default();
    let SimSection { n_listings, design, q, p0, p1, horizon, burn_in, replications, seed } = file;
    Ok(SimConfig {
        n_listings: require(args.n_listings.or(n_listings), "simulate.n_listings (config or --n-listings)")?,
        params: args.market.overrides().apply(config.params.as_ref())?,
        design: args.design.or(design).unwrap_or(SimDesign::Global),
        q: args.q.or(q).unwrap_or(0.5),
        p0: require(args.p0.or(p0), "simulate.p0 (config or --p0)")?,
        p1: args.p1.or(p1),
        horizon: require(args.horizon.or(horizon), "simulate.horizon (config or --horizon)")?,
        burn_in: args.burn_in.or(burn_in),
        replications: args.replications.or(replications).unwrap_or(1),
        seed: cli.seed.or(seed).unwrap_or(0),
    })
}

fn dispatch(cli: &Cli, config: &ConfigFile) -> CliResult<()> {
    let out = cli.out.as_deref();
    let tol = config.tolerances.unwrap_or_default();
    match &cli.command {
        Command::Steady(args) | Command::Gte(args) | Command::Bias(args) => {
            let name = match &cli.command {
                Command::Steady(_) => "steady",
                Command::Gte(_) => "gte",
                _ => "bias",
            };
            let point = config.point.clone().unwrap_or_default();
            let params = args.market.overrides().resolve(config.params.as_ref())?;
            let p = require(args.p.or(point.p), "price (--p or point.p)")?;
            let design = args.design.or(point.design).unwrap_or(Design::Lr);
            let q = args.q.or(point.q).unwrap_or(0.5);
            let report = bias_report(&params, design, q, p)?;
            write_output(out, json_output(name, &report).as_bytes())
        }
        Command::Sweep(args) => {
            let params = args.market.overrides().resolve(config.params.as_ref())?;
            let spec = sweep_spec(config, args, &params);
            let rows = run_sweep(&params, &spec)?;
            let mut buf = Vec::new();
            write_csv(&rows, &spec, &mut buf)?;
            write_output(out, &buf)
        }
        Command::Limits(args) => {
            let section = config.limits.clone().unwrap_or_default();
            let params = args.market.overrides().resolve(config.params.as_ref())?;
            let p = require(args.p.or(section.p), "price (--p or limits.p)")?;
            let betas = args.betas.clone().or(section.betas).unwrap_or_else(default_ladder);
            let report = limits_report(&params, p, &betas)?;
            write_output(out, json_output("limits", &report).as_bytes())
        }
        Command::Simulate(args) => {
            let cfg = sim_config(cli, config, args)?;
            let report = run_simulation(&cfg)?;
            write_output(out, json_output("simulate", &report).as_bytes())?;
            let csv_path = args
                .csv
                .clone()
                .or_else(|| out.filter(|p| p.extension().is_none_or(|e| e != "csv")).map(|p| p.with_extension("csv")));
            if let Some(path) = csv_path {
                let mut buf = Vec::new();
                write_replications_csv(&report, &mut buf)?;
                write_output(Some(&path), &buf)?;
            }
            Ok(())
        }
        Command::Check(args) => {
            let params = args.market.overrides().resolve(config.params.as_ref())?;
            let identity_tol = cli.tol.unwrap_or(1e-6);
            if !(identity_tol > 0.0) {
                return Err(CliError::input(format!("--tol must be > 0, got {identity_tol}")));
            }
            let report = run_checks(&params, &tol, identity_tol);
            for p in &report.properties {
                eprintln!("[{}] {}: {}", if p.passed { "PASS" } else { "FAIL" }, p.name, p.detail);
            }
            write_output(out, json_output("check", &report).as_bytes())?;
            let failed = report.properties.iter().filter(|p| !p.passed).count();
            if failed > 0 {
                return Err(CliError::PropertyFailure(failed, report.properties.len()));
            }
            Ok(())
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => load_config(path)?,
        None => ConfigFile { schema_version: SCHEMA_VERSION, ..Default::default() },
    };
    match cli.threads {
        Some(0) => Err(CliError::input("--threads must be >= 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::input(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| dispatch(cli, &config))
        }
        None => dispatch(cli, &config),
    }
}

//! Price by market-balance grids: GTE, biases, estimators and the
//! change-of-sign classification for both experiment designs.

use std::io::Write;

use pricelab_core::meanfield::steady_state;
use pricelab_core::pricing::{linspace, Region, SignClassification};
use pricelab_core::report::analytic_classification;
use pricelab_core::{Design, MarketParams};
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::format::format_float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisName {
    P,
    Lambda,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: AxisName,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.scale {
            Scale::Linear => linspace(self.lo, self.hi, self.n),
            Scale::Log => linspace(self.lo.ln(), self.hi.ln(), self.n).into_iter().map(f64::exp).collect(),
        }
    }

    fn validate(&self, label: &str) -> CliResult<()> {
        if self.n < 2 {
            return Err(CliError::input(format!("{label}.n must be >= 2, got {}", self.n)));
        }
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(CliError::input(format!("{label} needs lo < hi, got [{}, {}]", self.lo, self.hi)));
        }
        if self.scale == Scale::Log && !(self.lo > 0.0) {
            return Err(CliError::input(format!("{label} on a log scale needs lo > 0, got {}", self.lo)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignChoice {
    Lr,
    Cr,
    #[default]
    Both,
}

impl DesignChoice {
    pub fn includes(self, design: Design) -> bool {
        matches!(
            (self, design),
            (DesignChoice::Both, _) | (DesignChoice::Lr, Design::Lr) | (DesignChoice::Cr, Design::Cr)
        )
    }
}

/// Column groups. The GTE, bias, estimator and region columns are always
/// written; the other two groups are opt-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputGroup {
    Gte,
    Bias,
    Estimator,
    Region,
    Elasticities,
    Normalized,
}

fn default_q() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis1: Axis,
    pub axis2: Axis,
    #[serde(default)]
    pub design: DesignChoice,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub outputs: Vec<OutputGroup>,
}

impl SweepSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.axis1.name != AxisName::P {
            return Err(CliError::input("sweep.axis1.name must be \"p\""));
        }
        if self.axis2.name == AxisName::P {
            return Err(CliError::input("sweep.axis2.name must be \"lambda\" or \"beta\""));
        }
        self.axis1.validate("sweep.axis1")?;
        self.axis2.validate("sweep.axis2")?;
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(CliError::input(format!("sweep.q must lie in (0, 1), got {}", self.q)));
        }
        Ok(())
    }

    fn wants(&self, group: OutputGroup) -> bool {
        self.outputs.contains(&group)
    }
}

/// Per-design part of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignCell {
    pub bias: f64,
    pub estimator: f64,
    pub condition_b: bool,
    pub region: Region,
    pub experimental_elasticity: f64,
    pub modified_markup_b: f64,
}

impl From<&SignClassification> for DesignCell {
    fn from(c: &SignClassification) -> Self {
        DesignCell {
            bias: c.bias_pi,
            estimator: c.estimator_pi,
            condition_b: c.condition_b,
            region: c.region(),
            experimental_elasticity: c.experimental_elasticity,
            modified_markup_b: c.modified_markup_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellValues {
    pub s_star: f64,
    pub demand: f64,
    pub gte_pi: f64,
    pub condition_a: bool,
    pub elasticity: f64,
    pub markup_a: f64,
    pub lr: Option<DesignCell>,
    pub cr: Option<DesignCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub lambda: f64,
    pub tau: f64,
    pub beta: f64,
    /// `Err` holds the reason the cell could not be evaluated.
    pub values: Result<CellValues, String>,
}

fn evaluate(params: &MarketParams, spec: &SweepSpec, p: f64) -> pricelab_core::Result<CellValues> {
    let s_star = steady_state(params, p)?.s_star;
    let mut shared = None;
    let mut cells = [None, None];
    for (slot, design) in cells.iter_mut().zip(Design::BOTH) {
        if spec.design.includes(design) {
            let c = analytic_classification(params, design, spec.q, p)?;
            *slot = Some(DesignCell::from(&c));
            shared = Some(c);
        }
    }
    let c = shared.expect("at least one design is selected");
    let [lr, cr] = cells;
    Ok(CellValues {
        s_star,
        demand: c.demand,
        gte_pi: c.gte_pi,
        condition_a: c.condition_a,
        elasticity: c.elasticity,
        markup_a: c.markup_a,
        lr,
        cr,
    })
}

/// Evaluates every cell, axis2 outer and axis1 inner. Cells run in parallel
/// on the current rayon pool; the result order never depends on scheduling.
pub fn run_sweep(params: &MarketParams, spec: &SweepSpec) -> CliResult<Vec<SweepRow>> {
    spec.validate()?;
    params.validate()?;
    let prices = spec.axis1.values();
    let outer = spec.axis2.values();
    let cells: Vec<(f64, f64)> = outer.iter().flat_map(|&a| prices.iter().map(move |&p| (a, p))).collect();
    let rows = cells
        .par_iter()
        .map(|&(a, p)| {
            let cell = match spec.axis2.name {
                AxisName::Beta => params.with_beta(a),
                _ => params.with_lambda(a),
            };
            SweepRow {
                p,
                lambda: cell.lambda,
                tau: cell.tau,
                beta: cell.beta(),
                values: evaluate(&cell, spec, p).map_err(|e| e.to_string()),
            }
        })
        .collect();
    Ok(rows)
}

const CORE_COLUMNS: [&str; 15] = [
    "p",
    "lambda",
    "beta",
    "s_star",
    "demand",
    "gte_pi",
    "bias_lr",
    "bias_cr",
    "est_lr",
    "est_cr",
    "cond_a",
    "cond_b_lr",
    "cond_b_cr",
    "class_lr",
    "class_cr",
];
const ELASTICITY_COLUMNS: [&str; 6] =
    ["elasticity", "exp_elasticity_lr", "exp_elasticity_cr", "markup_a", "markup_b_lr", "markup_b_cr"];
const NORMALIZED_COLUMNS: [&str; 6] = [
    "gte_pi_per_lambda",
    "gte_pi_per_tau",
    "bias_lr_per_lambda",
    "bias_lr_per_tau",
    "bias_cr_per_lambda",
    "bias_cr_per_tau",
];

pub fn header(spec: &SweepSpec) -> Vec<&'static str> {
    let mut cols: Vec<&str> = CORE_COLUMNS.to_vec();
    if spec.wants(OutputGroup::Elasticities) {
        cols.extend(ELASTICITY_COLUMNS);
    }
    if spec.wants(OutputGroup::Normalized) {
        cols.extend(NORMALIZED_COLUMNS);
    }
    cols.push("status");
    cols
}

fn record(row: &SweepRow, spec: &SweepSpec) -> Vec<String> {
    let f = |x: f64| format_float(x);
    let mut out = vec![f(row.p), f(row.lambda), f(row.beta)];
    let width = header(spec).len();
    let v = match &row.values {
        Ok(v) => v,
        Err(reason) => {
            out.resize(width - 1, String::new());
            out.push(format!("error: {reason}"));
            return out;
        }
    };
    let design =
        |cell: &Option<DesignCell>, pick: fn(&DesignCell) -> String| cell.as_ref().map(pick).unwrap_or_default();
    out.extend([f(v.s_star), f(v.demand), f(v.gte_pi)]);
    out.push(design(&v.lr, |d| format_float(d.bias)));
    out.push(design(&v.cr, |d| format_float(d.bias)));
    out.push(design(&v.lr, |d| format_float(d.estimator)));
    out.push(design(&v.cr, |d| format_float(d.estimator)));
    out.push(v.condition_a.to_string());
    out.push(design(&v.lr, |d| d.condition_b.to_string()));
    out.push(design(&v.cr, |d| d.condition_b.to_string()));
    out.push(design(&v.lr, |d| d.region.as_str().to_string()));
    out.push(design(&v.cr, |d| d.region.as_str().to_string()));
    if spec.wants(OutputGroup::Elasticities) {
        out.push(f(v.elasticity));
        out.push(design(&v.lr, |d| format_float(d.experimental_elasticity)));
        out.push(design(&v.cr, |d| format_float(d.experimental_elasticity)));
        out.push(f(v.markup_a));
        out.push(design(&v.lr, |d| format_float(d.modified_markup_b)));
        out.push(design(&v.cr, |d| format_float(d.modified_markup_b)));
    }
    if spec.wants(OutputGroup::Normalized) {
        out.push(f(v.gte_pi / row.lambda));
        out.push(f(v.gte_pi / row.tau));
        for cell in [&v.lr, &v.cr] {
            out.push(cell.as_ref().map(|d| format_float(d.bias / row.lambda)).unwrap_or_default());
            out.push(cell.as_ref().map(|d| format_float(d.bias / row.tau)).unwrap_or_default());
        }
    }
    out.push("ok".into());
    out
}

pub fn write_csv<W: Write>(rows: &[SweepRow], spec: &SweepSpec, writer: W) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(header(spec))?;
    for row in rows {
        w.write_record(record(row, spec))?;
    }
    w.flush().map_err(|source| CliError::Io { path: "csv output".into(), source })?;
    Ok(())
}

pub fn sweep_csv(params: &MarketParams, spec: &SweepSpec) -> CliResult<String> {
    let rows = run_sweep(params, spec)?;
    let mut buf = Vec::new();
    write_csv(&rows, spec, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_params;

    fn spec(n1: usize, n2: usize) -> SweepSpec {
        SweepSpec {
            axis1: Axis { name: AxisName::P, lo: 1.0, hi: 6.0, n: n1, scale: Scale::Linear },
            axis2: Axis { name: AxisName::Lambda, lo: 0.1, hi: 10.0, n: n2, scale: Scale::Log },
            design: DesignChoice::Both,
            q: 0.5,
            outputs: vec![],
        }
    }

    #[test]
    fn two_by_two_grid() {
        let csv = sweep_csv(&default_params(), &spec(2, 2)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(
            lines[0],
            "p,lambda,beta,s_star,demand,gte_pi,bias_lr,bias_cr,est_lr,est_cr,cond_a,cond_b_lr,cond_b_cr,class_lr,class_cr,status"
        );
        assert!(lines[1].starts_with("1,0.1,0.1,"));
        assert!(lines[2].starts_with("6,0.1,0.1,"));
        assert!(lines[3].starts_with("1,10,10,"));
        assert!(!csv.contains('\r'));
        assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
    }

    #[test]
    fn optional_groups_and_design_filter() {
        let mut s = spec(3, 2);
        s.outputs = vec![OutputGroup::Normalized, OutputGroup::Elasticities];
        s.design = DesignChoice::Lr;
        let h = header(&s);
        assert_eq!(h.len(), 15 + 6 + 6 + 1);
        assert_eq!(h[15], "elasticity");
        assert_eq!(h[21], "gte_pi_per_lambda");
        let rows = run_sweep(&default_params(), &s).unwrap();
        let v = rows[0].values.as_ref().unwrap();
        assert!(v.lr.is_some() && v.cr.is_none());
        let rec = record(&rows[0], &s);
        assert_eq!(rec.len(), h.len());
        assert_eq!(rec[7], "");
    }

    #[test]
    fn beta_axis_and_classes_agree_with_columns() {
        let mut s = spec(9, 4);
        s.axis2.name = AxisName::Beta;
        for row in run_sweep(&default_params(), &s).unwrap() {
            assert_eq!(row.beta, row.lambda / row.tau);
            let v = row.values.unwrap();
            for cell in [v.lr.unwrap(), v.cr.unwrap()] {
                assert_eq!(cell.estimator, v.gte_pi - cell.bias);
                assert_eq!(cell.region, Region::from_conditions(v.gte_pi >= 0.0, cell.estimator <= 0.0));
            }
        }
    }

    #[test]
    fn failed_cells_are_recorded_not_fatal() {
        let mut s = spec(3, 2);
        s.axis1.lo = 0.5; // below cost 1
        let csv = sweep_csv(&default_params(), &s).unwrap();
        let first = csv.lines().nth(1).unwrap();
        assert!(first.ends_with(",error: price 0.5 is below marginal cost 1"), "{first}");
        assert_eq!(first.split(',').count(), 16);
        assert!(csv.lines().nth(2).unwrap().ends_with(",ok"));
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(1, 2);
        assert!(s.validate().is_err());
        s = spec(2, 2);
        s.axis2.lo = 0.0;
        assert!(s.validate().is_err());
        s = spec(2, 2);
        s.axis1.name = AxisName::Lambda;
        assert!(s.validate().is_err());
        s = spec(2, 2);
        s.q = 1.0;
        assert!(s.validate().is_err());
    }
}

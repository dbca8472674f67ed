//! Versioned JSON configuration. Every section is optional; command-line
//! flags override file values.

use std::path::Path;

use pricelab_core::sim::SimDesign;
use pricelab_core::{Design, MarketParams, Tolerances, Valuation};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::sweep::SweepSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    #[serde(default)]
    pub params: Option<MarketParams>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    #[serde(default)]
    pub point: Option<PointSection>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub limits: Option<LimitsSection>,
    #[serde(default)]
    pub simulate: Option<SimSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSection {
    pub p: Option<f64>,
    pub design: Option<Design>,
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub p: Option<f64>,
    pub betas: Option<Vec<f64>>,
}

/// Simulation settings; market parameters come from the top-level `params`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub n_listings: Option<usize>,
    pub design: Option<SimDesign>,
    pub q: Option<f64>,
    pub p0: Option<f64>,
    pub p1: Option<f64>,
    pub horizon: Option<f64>,
    pub burn_in: Option<f64>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
}

pub fn parse_config(text: &str) -> CliResult<ConfigFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::input(format!("invalid config: {}", e.inner()))
        } else {
            CliError::input(format!("invalid config at {path}: {}", e.inner()))
        }
    })?;
    if config.schema_version != SCHEMA_VERSION {
        return Err(CliError::input(format!(
            "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
            config.schema_version
        )));
    }
    if let Some(tol) = &config.tolerances {
        tol.validate().map_err(|e| CliError::input(format!("invalid config at tolerances: {e}")))?;
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> CliResult<ConfigFile> {
    let text =
        std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

/// Parameters used when neither file nor flags give them: the exponential
/// instance `v(p) = exp(5 - p)` with unit rates, mass and outside option and
/// cost 1.
pub fn default_params() -> MarketParams {
    MarketParams { rho: 1.0, lambda: 1.0, tau: 1.0, epsilon: 1.0, cost: 1.0, valuation: Valuation::exponential(5.0) }
}

/// Flag overrides for [`MarketParams`].
#[derive(Debug, Clone, Default)]
pub struct ParamOverrides {
    pub rho: Option<f64>,
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub beta: Option<f64>,
    pub epsilon: Option<f64>,
    pub cost: Option<f64>,
    pub level: Option<f64>,
}

impl ParamOverrides {
    /// Applies the overrides without validating, so that callers with
    /// looser rules (the simulator allows `lambda = 0`) can check themselves.
    pub fn apply(&self, base: Option<&MarketParams>) -> CliResult<MarketParams> {
        let mut params = base.cloned().unwrap_or_else(default_params);
        if self.lambda.is_some() && self.beta.is_some() {
            return Err(CliError::input("give --lambda or --beta, not both"));
        }
        let set = |slot: &mut f64, value: Option<f64>| {
            if let Some(v) = value {
                *slot = v;
            }
        };
        set(&mut params.rho, self.rho);
        set(&mut params.lambda, self.lambda);
        set(&mut params.tau, self.tau);
        set(&mut params.epsilon, self.epsilon);
        set(&mut params.cost, self.cost);
        if let Some(beta) = self.beta {
            params.lambda = beta * params.tau;
        }
        if let Some(level) = self.level {
            params.valuation = Valuation::exponential(level);
        }
        Ok(params)
    }

    pub fn resolve(&self, base: Option<&MarketParams>) -> CliResult<MarketParams> {
        let params = self.apply(base)?;
        params.validate()?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = parse_config(r#"{"schema_version": 1}"#).unwrap();
        assert!(c.params.is_none() && c.sweep.is_none());
    }

    #[test]
    fn schema_version_is_required_and_checked() {
        let err = parse_config("{}").unwrap_err().to_string();
        assert!(err.contains("schema_version"), "{err}");
        let err = parse_config(r#"{"schema_version": 7}"#).unwrap_err().to_string();
        assert!(err.contains("unsupported schema_version 7"), "{err}");
    }

    #[test]
    fn errors_name_the_field_path() {
        let text = r#"{"schema_version": 1, "params": {"rho": 1, "lambda": 1, "tau": 1, "epsilon": "one",
            "cost": 1, "valuation": {"family": "exponential", "V": 5}}}"#;
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("params.epsilon"), "{err}");
        let text = r#"{"schema_version": 1, "sweep": {"axis1": {"name": "p", "lo": 1, "hi": 2, "n": 2},
            "axis2": {"name": "lambda", "lo": 1, "hi": 2, "n": 2, "scale": "cubic"}}}"#;
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("sweep.axis2.scale"), "{err}");
        let err = parse_config(r#"{"schema_version": 1, "extra": 0}"#).unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn valuation_families_parse() {
        for valuation in [
            r#"{"family": "exponential", "V": 5}"#,
            r#"{"family": "linear", "intercept": 10, "slope": 1}"#,
            r#"{"family": "power", "scale": 1, "exponent": 1}"#,
        ] {
            let text = format!(
                r#"{{"schema_version": 1, "params": {{"rho": 1, "lambda": 1, "tau": 1, "epsilon": 1, "cost": 0.5, "valuation": {valuation}}}}}"#
            );
            parse_config(&text).unwrap().params.unwrap().validate().unwrap();
        }
    }

    #[test]
    fn overrides() {
        let o = ParamOverrides { beta: Some(4.0), tau: Some(2.0), level: Some(3.0), ..Default::default() };
        let p = o.resolve(None).unwrap();
        assert_eq!((p.lambda, p.tau), (8.0, 2.0));
        assert_eq!(p.valuation.value(3.0), 1.0);
        let both = ParamOverrides { beta: Some(1.0), lambda: Some(1.0), ..Default::default() };
        assert!(both.resolve(None).is_err());
        let zero = ParamOverrides { lambda: Some(0.0), ..Default::default() };
        assert!(zero.resolve(None).unwrap_err().to_string().contains("lambda"));
    }
}

//! TOML configuration. Every table rejects unknown keys.
//!
//! ```toml
//! seed = 7
//! threads = 4
//! mechanism = "mep+efficient-linear"
//!
//! [model]
//! family = "linear"            # linear | power-market | proportional | quasi-monotone
//! agents = 2
//! alpha = -0.5                 # power-market growth rate
//! alpha_matrix = [[1.0, -0.2], [0.3, 0.8]]
//! linear = [1.0, 0.8]          # quasi-monotone own terms a_i q_i + b_i q_i^2
//! quadratic = [0.2, 0.1]
//! cross = [[0.0, -0.4], [0.5, 0.0]]
//! quality = "sigmoid"          # identity | identity-unbounded | sigmoid
//!
//! [grid]
//! upper_bound = 1.0
//! step = 0.25
//!
//! [audit]
//! properties = ["ic", "ir"]
//! tol = 1e-9
//! quad_step = 1e-3
//!
//! [run]
//! types = [0.5, 0.3]
//! reports = [0.5, "none"]
//!
//! [boundary]
//! alpha = -0.8
//! cap = 500
//! agents = 2
//! full = false
//!
//! [sweep]
//! experiment = "scaling"       # scaling | types | boundary
//! [sweep.scaling]              # seed, samples, min_agents, max_agents, positive_diagonal
//! [sweep.types]                # seed, samples, t1, t2_max, points, positive_diagonal
//! [sweep.boundary]             # alpha_start, alpha_stop, alpha_step, cap, agents
//! ```

use std::path::Path;

use externa::experiments::{BoundarySweepConfig, ScalingConfig, TypeSweepConfig};
use serde::Deserialize;

use crate::UsageError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub mechanism: Option<String>,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub audit: AuditConfig,
    pub run: RunConfig,
    pub boundary: BoundaryConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub family: Option<String>,
    pub agents: Option<usize>,
    pub alpha: Option<f64>,
    pub alpha_matrix: Option<Vec<Vec<f64>>>,
    pub linear: Option<Vec<f64>>,
    pub quadratic: Option<Vec<f64>>,
    pub cross: Option<Vec<Vec<f64>>>,
    pub quality: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub upper_bound: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub properties: Option<Vec<String>>,
    pub tol: Option<f64>,
    pub quad_step: Option<f64>,
}

/// A report in the config: a number, or the string `"none"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ReportValue {
    Size(f64),
    Word(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub types: Option<Vec<f64>>,
    pub reports: Option<Vec<ReportValue>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    pub alpha: Option<f64>,
    pub cap: Option<usize>,
    pub agents: Option<usize>,
    pub full: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub experiment: Option<String>,
    pub scaling: ScalingConfig,
    pub types: TypeSweepConfig,
    pub boundary: BoundarySweepConfig,
}

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self, UsageError> {
        toml::from_str(text).map_err(|e| UsageError(format!("config {origin}: {e}")))
    }

    pub fn load(path: Option<&Path>) -> Result<Self, UsageError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_reports_line() {
        let err = Config::parse("[grid]\nupper_bound = 1.0\nstpe = 0.5\n", "t.toml").unwrap_err();
        assert!(err.0.contains("line 3"), "{}", err.0);
        assert!(err.0.contains("stpe"), "{}", err.0);
    }

    #[test]
    fn nested_experiment_tables() {
        let cfg = Config::parse("[sweep]\nexperiment = \"types\"\n[sweep.types]\nsamples = 3\n", "t").unwrap();
        assert_eq!(cfg.sweep.types.samples, 3);
        assert_eq!(cfg.sweep.types.points, 21);
        assert!(Config::parse("[sweep.types]\nbogus = 1\n", "t").is_err());
    }

    #[test]
    fn reports_accept_none() {
        let cfg = Config::parse("[run]\ntypes = [1.0, 2.0]\nreports = [0.5, \"none\"]\n", "t").unwrap();
        assert!(matches!(cfg.run.reports.unwrap()[1], ReportValue::Word(ref w) if w == "none"));
    }
}

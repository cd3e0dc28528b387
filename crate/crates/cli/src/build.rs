use std::sync::Arc;

use externa::experiments::{draw_linear_model, substream};
use externa::mechanism::{give_withhold_family, AllocationRule, BestModelAllocation, EfficientLinearAllocation};
use externa::{
    GridSpec, LinearExternalityModel, Mechanism, PowerMarketModel, ProportionalFixedMarketModel, QualityFunction,
    QuasiMonotoneModel, Report, Valuation,
};

use crate::args::ModelArgs;
use crate::config::{Config, ReportValue};
use crate::UsageError;

pub struct Market {
    pub family: String,
    pub model: Arc<dyn Valuation>,
    pub linear: Option<Arc<LinearExternalityModel>>,
    pub quality: QualityFunction,
}

impl Market {
    pub fn agents(&self) -> usize {
        self.model.agents()
    }

    /// The efficient allocation used by the existence algorithm.
    pub fn efficient_allocation(&self) -> Arc<dyn AllocationRule> {
        match &self.linear {
            Some(m) => Arc::new(EfficientLinearAllocation::new(m, self.quality.clone())),
            None => Arc::new(BestModelAllocation::new(self.agents(), self.quality.clone())),
        }
    }

    pub fn default_mechanism(&self) -> &'static str {
        if self.linear.is_some() {
            "mep+efficient-linear"
        } else {
            "mep+best-model"
        }
    }

    pub fn mechanism(&self, name: &str) -> Result<Mechanism, UsageError> {
        let q = self.quality.clone();
        Ok(match name {
            "mep+efficient-linear" => {
                let Some(m) = &self.linear else {
                    return Err(UsageError(format!(
                        "mechanism mep+efficient-linear needs --model linear, got {}",
                        self.family
                    )));
                };
                Mechanism::mep_efficient_linear(m.clone(), q)?
            }
            "mep+best-model" => Mechanism::mep_best_model(self.model.clone(), q)?,
            "vcg" => Mechanism::vcg(self.model.clone(), give_withhold_family(self.agents(), &q), q)?,
            "free" => Mechanism::free(self.agents(), q),
            other => {
                return Err(UsageError(format!(
                    "unknown mechanism '{other}' (expected mep+efficient-linear, mep+best-model, vcg or free)"
                )))
            }
        })
    }
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, UsageError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| UsageError(format!("{what}: '{}' is not a number", s.trim())))
        })
        .collect()
}

pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>, UsageError> {
    text.split(';').map(|row| parse_list(row, "--alpha-matrix")).collect()
}

pub fn parse_reports(text: &str) -> Result<Vec<Report>, UsageError> {
    text.split(',')
        .map(|s| match s.trim() {
            "none" => Ok(Report::Absent),
            v => v
                .parse::<f64>()
                .map(Report::Size)
                .map_err(|_| UsageError(format!("--reports: '{v}' is neither a number nor 'none'"))),
        })
        .collect()
}

pub fn config_reports(values: &[ReportValue]) -> Result<Vec<Report>, UsageError> {
    values
        .iter()
        .map(|v| match v {
            ReportValue::Size(s) => Ok(Report::Size(*s)),
            ReportValue::Word(w) if w == "none" => Ok(Report::Absent),
            ReportValue::Word(w) => Err(UsageError(format!("run.reports: '{w}' is neither a number nor \"none\""))),
        })
        .collect()
}

pub fn parse_types(text: &str) -> Result<Vec<f64>, UsageError> {
    parse_list(text, "--types")
}

pub fn market(args: &ModelArgs, cfg: &Config) -> Result<Market, UsageError> {
    let family = args
        .model
        .clone()
        .or_else(|| cfg.model.family.clone())
        .ok_or_else(|| UsageError("--model (or model.family) is required".into()))?;
    let matrix = match &args.alpha_matrix {
        Some(text) => Some(parse_matrix(text)?),
        None => cfg.model.alpha_matrix.clone(),
    };
    let agents = args
        .agents
        .or(cfg.model.agents)
        .or_else(|| matrix.as_ref().map(Vec::len))
        .or_else(|| cfg.model.linear.as_ref().map(Vec::len))
        .unwrap_or(2);
    let quality_name = args.quality.clone().or_else(|| cfg.model.quality.clone());
    let default_quality = match family.as_str() {
        "linear" | "quasi-monotone" => "sigmoid",
        _ => "identity-unbounded",
    };
    let quality_name = quality_name.as_deref().unwrap_or(default_quality);
    let quality = match quality_name {
        "identity-unbounded" => QualityFunction::identity_unbounded(),
        name => QualityFunction::by_name(name).ok_or_else(|| {
            UsageError(format!(
                "model.quality: unknown quality function '{name}' (expected identity, identity-unbounded or sigmoid)"
            ))
        })?,
    };

    let mut linear = None;
    let model: Arc<dyn Valuation> = match family.as_str() {
        "linear" => {
            let m = match matrix {
                Some(rows) => LinearExternalityModel::new(rows, false)?,
                None => {
                    let seed = args.seed.or(cfg.seed).unwrap_or(0);
                    draw_linear_model(&mut substream(seed, 0, 0), agents, true)?
                }
            };
            let m = Arc::new(m);
            linear = Some(m.clone());
            m
        }
        "power-market" => {
            let alpha = args
                .alpha
                .or(cfg.model.alpha)
                .ok_or_else(|| UsageError("power-market needs --alpha (or model.alpha)".into()))?;
            Arc::new(PowerMarketModel::new(agents, alpha)?)
        }
        "proportional" => Arc::new(ProportionalFixedMarketModel::new(agents)?),
        "quasi-monotone" => {
            let linear_terms = cfg.model.linear.clone().unwrap_or_else(|| vec![1.0; agents]);
            let n = linear_terms.len();
            let quadratic = cfg.model.quadratic.clone().unwrap_or_else(|| vec![0.0; n]);
            let cross = cfg.model.cross.clone().unwrap_or_else(|| vec![vec![0.0; n]; n]);
            Arc::new(QuasiMonotoneModel::polynomial(linear_terms, quadratic, cross)?)
        }
        other => {
            return Err(UsageError(format!(
                "model.family: unknown model '{other}' (expected linear, power-market, proportional or quasi-monotone)"
            )))
        }
    };
    Ok(Market {
        family,
        model,
        linear,
        quality,
    })
}

/// Parses `D=<upper>,eps=<step>`.
fn parse_grid(text: &str) -> Result<(f64, f64), UsageError> {
    let (mut upper, mut step) = (None, None);
    for part in text.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| UsageError(format!("--grid: expected key=value, got '{part}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("--grid: '{}' is not a number", value.trim())))?;
        match key.trim() {
            "D" | "upper_bound" => upper = Some(value),
            "eps" | "step" => step = Some(value),
            k => return Err(UsageError(format!("--grid: unknown key '{k}' (expected D and eps)"))),
        }
    }
    match (upper, step) {
        (Some(u), Some(s)) => Ok((u, s)),
        _ => Err(UsageError("--grid needs both D and eps".into())),
    }
}

pub fn grid(args: &ModelArgs, cfg: &Config) -> Result<GridSpec, UsageError> {
    let (mut upper, mut step) = (cfg.grid.upper_bound, cfg.grid.step);
    if let Some(text) = &args.grid {
        let (u, s) = parse_grid(text)?;
        upper = Some(u);
        step = Some(s);
    }
    upper = args.upper.or(upper);
    step = args.eps.or(step);
    match (upper, step) {
        (Some(u), Some(s)) => Ok(GridSpec::new(u, s, false)?),
        _ => Err(UsageError("a grid is required: --grid D=..,eps=.. or --D and --eps (or [grid])".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("D=1,eps=0.25").unwrap(), (1.0, 0.25));
        assert!(parse_grid("D=1").is_err());
        assert!(parse_grid("D=1,h=2").is_err());
    }

    #[test]
    fn matrix_and_reports() {
        assert_eq!(parse_matrix("1,0;0,1").unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(parse_matrix("1,x").is_err());
        assert_eq!(parse_reports("0.5, none").unwrap(), vec![Report::Size(0.5), Report::Absent]);
    }
}

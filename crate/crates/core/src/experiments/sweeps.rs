use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::existence::disparity_boundary;
use crate::mechanism::Mechanism;
use crate::profile::Report;
use crate::quality::QualityFunction;

use super::{draw_linear_model, mean, substream, CsvRecord};

/// Utility gain that counts as a spot IC violation.
const SPOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub seed: u64,
    pub samples: usize,
    pub min_agents: usize,
    pub max_agents: usize,
    /// Draw own coefficients from `U(0, 1)` instead of `U[−1, 1)`.
    pub positive_diagonal: bool,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 50,
            min_agents: 2,
            max_agents: 16,
            positive_diagonal: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub revenue: f64,
    pub welfare: f64,
    pub best_quality: f64,
    /// Ratio of mean revenue to mean welfare.
    pub revenue_welfare_ratio: f64,
    /// Samples whose single random under-report paid off.
    pub spot_ic_violations: usize,
}

impl CsvRecord for ScalingRow {
    const HEADER: &'static str = "n,revenue,welfare,best_quality";

    fn write_fields(&self, out: &mut String) {
        let _ = write!(out, "{},{},{},{}", self.n, self.revenue, self.welfare, self.best_quality);
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    Ok(())
}

struct Sample {
    revenue: f64,
    welfare: f64,
    best_quality: f64,
    utilities: Vec<f64>,
    spot_violation: bool,
}

/// Runs MEP with the efficient linear allocation on one random instance
/// with truthful reports, plus one random under-report by one agent.
fn mep_sample<R: Rng>(rng: &mut R, types: &[f64], positive_diagonal: bool) -> Result<Sample> {
    let n = types.len();
    let quality = QualityFunction::sigmoid();
    let model = Arc::new(draw_linear_model(rng, n, positive_diagonal)?);
    let mech = Mechanism::mep_efficient_linear(Arc::clone(&model), quality.clone())?;
    let reports: Vec<Report> = types.iter().map(|&t| Report::Size(t)).collect();
    let honest = mech.run(model.as_ref(), &quality, types, &reports)?;

    let agent = rng.gen_range(0..n);
    let mut lie = reports.clone();
    lie[agent] = Report::Size(types[agent] * rng.gen_range(0.0..1.0));
    let deviated = mech.run(model.as_ref(), &quality, types, &lie)?;

    Ok(Sample {
        revenue: honest.revenue,
        welfare: honest.welfare,
        best_quality: quality.evaluate(types.iter().sum())?,
        spot_violation: deviated.utilities[agent] > honest.utilities[agent] + SPOT_TOL,
        utilities: honest.utilities,
    })
}

/// MEP outcomes averaged over random linear instances for each agent count.
pub fn mep_scaling_experiment(cfg: &ScalingConfig) -> Result<Vec<ScalingRow>> {
    check_samples(cfg.samples)?;
    if cfg.min_agents == 0 || cfg.min_agents > cfg.max_agents {
        return Err(Error::InvalidArgument(format!(
            "agent range {}..={} is empty",
            cfg.min_agents, cfg.max_agents
        )));
    }
    (cfg.min_agents..=cfg.max_agents)
        .map(|n| {
            let samples = (0..cfg.samples)
                .into_par_iter()
                .map(|s| {
                    let mut rng = substream(cfg.seed, n as u64, s as u64);
                    let types: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                    mep_sample(&mut rng, &types, cfg.positive_diagonal)
                })
                .collect::<Result<Vec<_>>>()?;
            let revenue = mean(samples.iter().map(|s| s.revenue));
            let welfare = mean(samples.iter().map(|s| s.welfare));
            Ok(ScalingRow {
                n,
                revenue,
                welfare,
                best_quality: mean(samples.iter().map(|s| s.best_quality)),
                revenue_welfare_ratio: revenue / welfare,
                spot_ic_violations: samples.iter().filter(|s| s.spot_violation).count(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TypeSweepConfig {
    pub seed: u64,
    pub samples: usize,
    /// Fixed type of agent 1.
    pub t1: f64,
    /// Agent 2's type runs over `points` evenly spaced values in `[0, t2_max]`.
    pub t2_max: f64,
    pub points: usize,
    pub positive_diagonal: bool,
}

impl Default for TypeSweepConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 50,
            t1: 1.0,
            t2_max: 2.0,
            points: 21,
            positive_diagonal: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeSweepRow {
    pub t2: f64,
    pub welfare: f64,
    pub revenue: f64,
    pub uti_1: f64,
    pub uti_2: f64,
}

impl CsvRecord for TypeSweepRow {
    const HEADER: &'static str = "t2,welfare,revenue,uti_1,uti_2";

    fn write_fields(&self, out: &mut String) {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            self.t2, self.welfare, self.revenue, self.uti_1, self.uti_2
        );
    }
}

/// Two-agent MEP with agent 1's type fixed and agent 2's type swept.
///
/// Sample `s` uses the same coefficient draw at every sweep point, so the
/// rows trace how each sampled market responds to agent 2's type.
pub fn mep_type_sweep(cfg: &TypeSweepConfig) -> Result<Vec<TypeSweepRow>> {
    check_samples(cfg.samples)?;
    if cfg.points < 2 || !(cfg.t2_max > 0.0) || !(cfg.t1 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "type sweep needs at least 2 points, t2_max > 0 and t1 >= 0, got points={} t2_max={} t1={}",
            cfg.points, cfg.t2_max, cfg.t1
        )));
    }
    (0..cfg.points)
        .map(|k| {
            let t2 = cfg.t2_max * k as f64 / (cfg.points - 1) as f64;
            let samples = (0..cfg.samples)
                .into_par_iter()
                .map(|s| {
                    let mut rng = substream(cfg.seed, 0, s as u64);
                    mep_sample(&mut rng, &[cfg.t1, t2], cfg.positive_diagonal)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TypeSweepRow {
                t2,
                welfare: mean(samples.iter().map(|s| s.welfare)),
                revenue: mean(samples.iter().map(|s| s.revenue)),
                uti_1: mean(samples.iter().map(|s| s.utilities[0])),
                uti_2: mean(samples.iter().map(|s| s.utilities[1])),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundarySweepConfig {
    pub alpha_start: f64,
    pub alpha_stop: f64,
    pub alpha_step: f64,
    pub cap: usize,
    pub agents: usize,
}

impl Default for BoundarySweepConfig {
    fn default() -> Self {
        Self {
            alpha_start: -1.0,
            alpha_stop: -0.668,
            alpha_step: 0.002,
            cap: 500,
            agents: 2,
        }
    }
}

impl BoundarySweepConfig {
    /// Growth rates `start, start + step, …` up to `stop`, rounded to nine
    /// decimals so that printed values stay short.
    pub fn alphas(&self) -> Result<Vec<f64>> {
        if !(self.alpha_step > 0.0) || !(self.alpha_stop >= self.alpha_start) {
            return Err(Error::InvalidArgument(format!(
                "alpha range {}..{} step {} is empty",
                self.alpha_start, self.alpha_stop, self.alpha_step
            )));
        }
        let count = ((self.alpha_stop - self.alpha_start) / self.alpha_step + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|k| ((self.alpha_start + k as f64 * self.alpha_step) * 1e9).round() / 1e9)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub alpha: f64,
    pub boundary: usize,
    pub open_above: bool,
}

impl CsvRecord for BoundaryRow {
    const HEADER: &'static str = "alpha,boundary,open_above";

    fn write_fields(&self, out: &mut String) {
        let _ = write!(out, "{},{},{}", self.alpha, self.boundary, self.open_above);
    }
}

/// Disparity boundary of the power market for each growth rate.
pub fn boundary_sweep(cfg: &BoundarySweepConfig) -> Result<Vec<BoundaryRow>> {
    cfg.alphas()?
        .into_par_iter()
        .map(|alpha| {
            let r = disparity_boundary(alpha, cfg.cap, cfg.agents)?;
            Ok(BoundaryRow {
                alpha,
                boundary: r.boundary,
                open_above: r.open_above,
            })
        })
        .collect()
}

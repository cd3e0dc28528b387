use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::audit::{audit_ic, AuditReport, Deviation, DEFAULT_TOL};
use crate::error::Result;
use crate::mechanism::{give_withhold_family, Mechanism};
use crate::profile::{GridSpec, Report};
use crate::quality::QualityFunction;
use crate::valuation::ProportionalFixedMarketModel;

type Q64 = Ratio<i64>;

const TRUTH: [i64; 2] = [10, 1];
const DEVIATION: i64 = 3;

fn fraction(r: Q64) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// VCG in the fixed proportional market, worked exactly.
///
/// Every allocation is efficient there, so the pooled model goes to both
/// agents. Agent 1 with true type `t_1` reports `report`; agent 2 is
/// truthful. Values are `q_i / Σ q` with `q_i = max{x_i, t_i}`.
fn exact_utility(truth: [i64; 2], report: i64) -> Q64 {
    let pooled = report + truth[1];
    let share = |q: [i64; 2], i: usize| Q64::new(q[i], q[0] + q[1]);
    let value = share([pooled.max(truth[0]), pooled], 0);
    // Clarke pivot with reported types: without agent 1 the pool is agent
    // 2's data, while agent 1 still serves its reported own-data model.
    let without = share([report, truth[1]], 1);
    let with = share([pooled, pooled], 1);
    value - (without - with)
}

/// The two-agent counterexample showing VCG is not IC here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcgReport {
    pub truth: Vec<f64>,
    pub deviation: f64,
    pub truthful_utility: String,
    pub deviating_utility: String,
    pub margin: String,
    pub truthful_utility_float: f64,
    pub deviating_utility_float: f64,
    pub margin_float: f64,
    /// Floating mechanism run agrees with the exact values within 1e-12.
    pub float_matches_exact: bool,
    pub ic_violated: bool,
    /// Grid IC audit of the same VCG mechanism on `{0, 1, …, 10}`.
    pub audit: AuditReport,
    /// The audit lists agent 1 at truth (10, 1) reporting 3.
    pub audit_flags_deviation: bool,
}

pub fn vcg_counterexample_report() -> Result<VcgReport> {
    let honest = exact_utility(TRUTH, TRUTH[0]);
    let lying = exact_utility(TRUTH, DEVIATION);
    let margin = lying - honest;

    let quality = QualityFunction::identity_unbounded();
    let model = Arc::new(ProportionalFixedMarketModel::new(2)?);
    let mech = Mechanism::vcg(model.clone(), give_withhold_family(2, &quality), quality.clone())?;
    let truth = [TRUTH[0] as f64, TRUTH[1] as f64];
    let run = |r: f64| mech.run(model.as_ref(), &quality, &truth, &[Report::Size(r), Report::Size(truth[1])]);
    let u_honest = run(truth[0])?.utilities[0];
    let u_lying = run(DEVIATION as f64)?.utilities[0];

    let as_f64 = |r: Q64| *r.numer() as f64 / *r.denom() as f64;
    let grid = GridSpec::new(truth[0], 1.0, false)?;
    let audit = audit_ic(&mech, model.as_ref(), &quality, &grid, DEFAULT_TOL)?;
    let audit_flags_deviation = audit.violations.iter().any(|v| {
        v.agent == Some(0) && v.profile == truth && v.deviation == Some(Deviation::Report(DEVIATION as f64))
    });

    Ok(VcgReport {
        truth: truth.to_vec(),
        deviation: DEVIATION as f64,
        truthful_utility: fraction(honest),
        deviating_utility: fraction(lying),
        margin: fraction(margin),
        truthful_utility_float: u_honest,
        deviating_utility_float: u_lying,
        margin_float: u_lying - u_honest,
        float_matches_exact: (u_honest - as_f64(honest)).abs() < 1e-12 && (u_lying - as_f64(lying)).abs() < 1e-12,
        ic_violated: margin > Q64::from_integer(0),
        audit,
        audit_flags_deviation,
    })
}

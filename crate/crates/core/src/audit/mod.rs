//! Grid audits of mechanism properties and numerical checks of the
//! necessary and sufficient payment conditions for truthfulness.
//!
//! All audits enumerate truthful type profiles over `grid^n` (the grid's
//! non-participation flag is ignored for truthful profiles) and compare
//! utilities at a tolerance. A violation is recorded when the relevant slack
//! drops below `-tol`; its `margin` is that slack.

mod brute;
mod conditions;

use serde::{Deserialize, Serialize};

pub use brute::{audit_desirable, audit_efficiency, audit_ic, audit_ir, audit_wbb, ir_margin};
pub use conditions::{check_necessary_conditions, check_sufficient_conditions, QUAD_STEP};

use crate::profile::GridSpec;

/// Default comparison tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Property {
    #[serde(rename = "IC")]
    Ic,
    #[serde(rename = "IR")]
    Ir,
    #[serde(rename = "WBB")]
    Wbb,
    #[serde(rename = "EFFICIENCY")]
    Efficiency,
    #[serde(rename = "DESIRABLE")]
    Desirable,
    #[serde(rename = "NECESSARY_COND")]
    NecessaryCondition,
    #[serde(rename = "SUFFICIENT_COND")]
    SufficientCondition,
}

impl std::fmt::Display for Property {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Property::Ic => "IC",
            Property::Ir => "IR",
            Property::Wbb => "WBB",
            Property::Efficiency => "EFFICIENCY",
            Property::Desirable => "DESIRABLE",
            Property::NecessaryCondition => "NECESSARY_COND",
            Property::SufficientCondition => "SUFFICIENT_COND",
        })
    }
}

/// What the deviating agent did, or which comparator won.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deviation {
    /// Reported a smaller type.
    Report(f64),
    /// Stayed out.
    Exit,
    /// A competing allocation from the efficiency family.
    Allocation(String),
    /// A pair of reports `(lower, upper)` in a payment-difference condition.
    Pair(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: Property,
    /// True type profile where the check failed.
    pub profile: Vec<f64>,
    pub agent: Option<usize>,
    pub deviation: Option<Deviation>,
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub property: Property,
    pub passed: bool,
    pub tolerance: f64,
    pub grid: GridSpec,
    /// Number of individual inequalities evaluated.
    pub checks: usize,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub(crate) fn new(property: Property, grid: &GridSpec, tol: f64, checks: usize, violations: Vec<Violation>) -> Self {
        Self {
            property,
            passed: violations.is_empty(),
            tolerance: tol,
            grid: *grid,
            checks,
            violations,
        }
    }

    /// Worst (most negative) margin among violations.
    pub fn worst_margin(&self) -> Option<f64> {
        self.violations.iter().map(|v| v.margin).reduce(f64::min)
    }
}

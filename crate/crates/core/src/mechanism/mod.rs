//! Allocation and payment rules, and the mechanism runner.

mod allocation;
mod payment;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use allocation::{
    best_model_allocation, efficient_allocation_linear, give_withhold_family, AllocationRule, BestModelAllocation,
    EfficientLinearAllocation, GiveWithholdAllocation, WelfareMaxAllocation,
};
pub use payment::{MaximalExploitationPayment, PaymentRule, ShiftedPayment, VcgPayment, ZeroPayment};

use crate::error::{Error, Result};
use crate::profile::{check_reports, Report};
use crate::quality::QualityFunction;
use crate::valuation::{LinearExternalityModel, Valuation};

/// Reported types for valuation purposes, with non-participants at zero.
pub(crate) fn reported_types(reports: &[Report]) -> Vec<f64> {
    reports.iter().map(|r| r.contribution()).collect()
}

pub(crate) fn own_qualities(quality: &QualityFunction, types: &[f64]) -> Result<Vec<f64>> {
    types.iter().map(|&t| quality.evaluate(t)).collect()
}

/// Deployed qualities `q_j = max{x_j, Q(t_j)}` given precomputed `Q(t_j)`.
pub(crate) fn deploy(x: &[f64], own: &[f64]) -> Vec<f64> {
    x.iter().zip(own).map(|(x, o)| x.max(*o)).collect()
}

/// Everything that happens when a mechanism meets a profile of true types
/// and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub allocation: Vec<f64>,
    pub payments: Vec<f64>,
    pub effective_qualities: Vec<f64>,
    pub values: Vec<f64>,
    pub utilities: Vec<f64>,
    pub revenue: f64,
    pub welfare: f64,
}

/// A paired allocation rule and payment rule.
///
/// Non-participants always receive nothing and pay nothing, whatever the
/// underlying rules return for them.
#[derive(Clone)]
pub struct Mechanism {
    label: String,
    allocation: Arc<dyn AllocationRule>,
    payment: Arc<dyn PaymentRule>,
}

impl std::fmt::Debug for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mechanism").field("label", &self.label).finish()
    }
}

impl Mechanism {
    pub fn new(allocation: Arc<dyn AllocationRule>, payment: Arc<dyn PaymentRule>) -> Result<Self> {
        if allocation.agents() != payment.agents() {
            return Err(Error::DimensionMismatch {
                expected: allocation.agents(),
                actual: payment.agents(),
            });
        }
        let label = format!("{}+{}", payment.label(), allocation.label());
        Ok(Self {
            label,
            allocation,
            payment,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// MEP over an arbitrary allocation rule.
    pub fn mep(allocation: Arc<dyn AllocationRule>, model: Arc<dyn Valuation>, quality: QualityFunction) -> Result<Self> {
        let payment = Arc::new(MaximalExploitationPayment::new(allocation.clone(), model, quality));
        Self::new(allocation, payment)
    }

    /// MEP with the column-sum efficient allocation for linear externalities.
    pub fn mep_efficient_linear(model: Arc<LinearExternalityModel>, quality: QualityFunction) -> Result<Self> {
        let allocation = Arc::new(EfficientLinearAllocation::new(&model, quality.clone()));
        Ok(Self::mep(allocation, model, quality)?.with_label("mep+efficient-linear"))
    }

    /// MEP with the best-model allocation.
    pub fn mep_best_model(model: Arc<dyn Valuation>, quality: QualityFunction) -> Result<Self> {
        let allocation = Arc::new(BestModelAllocation::new(model.agents(), quality.clone()));
        Ok(Self::mep(allocation, model, quality)?.with_label("mep+best-model"))
    }

    /// Best model to every participant, no charge.
    pub fn free(n: usize, quality: QualityFunction) -> Self {
        Self::new(Arc::new(BestModelAllocation::new(n, quality)), Arc::new(ZeroPayment::new(n)))
            .expect("agent counts agree")
            .with_label("free")
    }

    /// VCG: reported-welfare maximization over `family` with Clarke pivot
    /// payments.
    pub fn vcg(
        model: Arc<dyn Valuation>,
        family: Vec<Arc<dyn AllocationRule>>,
        quality: QualityFunction,
    ) -> Result<Self> {
        let allocation = Arc::new(WelfareMaxAllocation::new(family, model.clone(), quality.clone())?);
        let payment = Arc::new(VcgPayment::new(allocation.clone(), model, quality));
        Ok(Self::new(allocation, payment)?.with_label("vcg"))
    }

    /// Same allocation, payment shifted by `delta` for every participant.
    pub fn shifted(&self, delta: f64) -> Self {
        let payment = Arc::new(ShiftedPayment::new(self.payment.clone(), delta));
        Self {
            label: format!("{}{:+}", self.label, delta),
            allocation: self.allocation.clone(),
            payment,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn agents(&self) -> usize {
        self.allocation.agents()
    }

    pub fn allocation_rule(&self) -> &Arc<dyn AllocationRule> {
        &self.allocation
    }

    pub fn payment_rule(&self) -> &Arc<dyn PaymentRule> {
        &self.payment
    }

    pub fn allocate(&self, reports: &[Report]) -> Result<Vec<f64>> {
        let mut x = self.allocation.allocate(reports)?;
        zero_absent(&mut x, reports);
        Ok(x)
    }

    pub fn charge(&self, reports: &[Report]) -> Result<Vec<f64>> {
        let mut p = self.payment.charge(reports)?;
        zero_absent(&mut p, reports);
        Ok(p)
    }

    /// Runs the mechanism: allocation and payments from the reports, deployed
    /// qualities and values from the true types.
    pub fn run(&self, model: &dyn Valuation, quality: &QualityFunction, truth: &[f64], reports: &[Report]) -> Result<Outcome> {
        if model.agents() != self.agents() {
            return Err(Error::DimensionMismatch {
                expected: self.agents(),
                actual: model.agents(),
            });
        }
        check_reports(reports, truth)?;
        let allocation = self.allocate(reports)?;
        let payments = self.charge(reports)?;
        let own = own_qualities(quality, truth)?;
        let effective_qualities = deploy(&allocation, &own);
        let values = model.values(&effective_qualities)?;
        let utilities: Vec<f64> = values.iter().zip(&payments).map(|(v, p)| v - p).collect();
        Ok(Outcome {
            revenue: payments.iter().sum(),
            welfare: values.iter().sum(),
            allocation,
            payments,
            effective_qualities,
            values,
            utilities,
        })
    }
}

fn zero_absent(v: &mut [f64], reports: &[Report]) {
    for (x, r) in v.iter_mut().zip(reports) {
        if r.is_absent() {
            *x = 0.0;
        }
    }
}

/// Free-function form of [`Mechanism::run`].
pub fn run_mechanism(
    mechanism: &Mechanism,
    model: &dyn Valuation,
    quality: &QualityFunction,
    truth: &[f64],
    reports: &[Report],
) -> Result<Outcome> {
    mechanism.run(model, quality, truth, reports)
}

/// MEP payments for `reports` under `allocation`.
pub fn mep_payment(
    allocation: Arc<dyn AllocationRule>,
    model: Arc<dyn Valuation>,
    quality: &QualityFunction,
    reports: &[Report],
) -> Result<Vec<f64>> {
    MaximalExploitationPayment::new(allocation, model, quality.clone()).charge(reports)
}

/// VCG allocation and payments at `reports`.
pub fn vcg_mechanism(
    model: Arc<dyn Valuation>,
    family: Vec<Arc<dyn AllocationRule>>,
    quality: &QualityFunction,
    reports: &[Report],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mech = Mechanism::vcg(model, family, quality.clone())?;
    Ok((mech.allocate(reports)?, mech.charge(reports)?))
}

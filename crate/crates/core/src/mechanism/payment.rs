use std::sync::Arc;

use crate::error::Result;
use crate::profile::Report;
use crate::quality::QualityFunction;
use crate::valuation::Valuation;

use super::allocation::{check_len, AllocationRule, WelfareMaxAllocation};
use super::{deploy, own_qualities, reported_types};

/// Maps a report profile to payments owed by each agent.
pub trait PaymentRule: Send + Sync {
    fn label(&self) -> &str;

    fn agents(&self) -> usize;

    fn charge(&self, reports: &[Report]) -> Result<Vec<f64>>;
}

/// Charges nothing.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPayment {
    n: usize,
}

impl ZeroPayment {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl PaymentRule for ZeroPayment {
    fn label(&self) -> &str {
        "zero"
    }

    fn agents(&self) -> usize {
        self.n
    }

    fn charge(&self, reports: &[Report]) -> Result<Vec<f64>> {
        check_len(self.n, reports)?;
        Ok(vec![0.0; self.n])
    }
}

/// Maximal exploitation payment: each participant pays the value it gains
/// from participating over exiting, both evaluated at the reported types.
pub struct MaximalExploitationPayment {
    allocation: Arc<dyn AllocationRule>,
    model: Arc<dyn Valuation>,
    quality: QualityFunction,
}

impl MaximalExploitationPayment {
    pub fn new(allocation: Arc<dyn AllocationRule>, model: Arc<dyn Valuation>, quality: QualityFunction) -> Self {
        Self {
            allocation,
            model,
            quality,
        }
    }
}

impl PaymentRule for MaximalExploitationPayment {
    fn label(&self) -> &str {
        "mep"
    }

    fn agents(&self) -> usize {
        self.model.agents()
    }

    fn charge(&self, reports: &[Report]) -> Result<Vec<f64>> {
        check_len(self.agents(), reports)?;
        let own = own_qualities(&self.quality, &reported_types(reports))?;
        let q_in = deploy(&self.allocation.allocate(reports)?, &own);
        let mut exit = reports.to_vec();
        let mut out = vec![0.0; reports.len()];
        for (i, r) in reports.iter().enumerate() {
            if r.is_absent() {
                continue;
            }
            exit[i] = Report::Absent;
            let q_out = deploy(&self.allocation.allocate(&exit)?, &own);
            exit[i] = *r;
            out[i] = self.model.value_of(i, &q_in)? - self.model.value_of(i, &q_out)?;
        }
        Ok(out)
    }
}

/// Clarke pivot payment: the harm an agent's participation does to the
/// others' reported welfare.
pub struct VcgPayment {
    allocation: Arc<WelfareMaxAllocation>,
    model: Arc<dyn Valuation>,
    quality: QualityFunction,
}

impl VcgPayment {
    pub fn new(allocation: Arc<WelfareMaxAllocation>, model: Arc<dyn Valuation>, quality: QualityFunction) -> Self {
        Self {
            allocation,
            model,
            quality,
        }
    }
}

impl PaymentRule for VcgPayment {
    fn label(&self) -> &str {
        "vcg"
    }

    fn agents(&self) -> usize {
        self.model.agents()
    }

    fn charge(&self, reports: &[Report]) -> Result<Vec<f64>> {
        check_len(self.agents(), reports)?;
        let own = own_qualities(&self.quality, &reported_types(reports))?;
        let v_in = self.model.values(&deploy(&self.allocation.allocate(reports)?, &own))?;
        let mut exit = reports.to_vec();
        let mut out = vec![0.0; reports.len()];
        for (i, r) in reports.iter().enumerate() {
            if r.is_absent() {
                continue;
            }
            exit[i] = Report::Absent;
            let v_out = self.model.values(&deploy(&self.allocation.allocate(&exit)?, &own))?;
            exit[i] = *r;
            let others = |v: &[f64]| v.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| x).sum::<f64>();
            out[i] = others(&v_out) - others(&v_in);
        }
        Ok(out)
    }
}

/// Adds a constant to every participant's payment under a base rule.
pub struct ShiftedPayment {
    base: Arc<dyn PaymentRule>,
    delta: f64,
    label: String,
}

impl ShiftedPayment {
    pub fn new(base: Arc<dyn PaymentRule>, delta: f64) -> Self {
        let label = format!("{}{:+}", base.label(), delta);
        Self { base, delta, label }
    }
}

impl PaymentRule for ShiftedPayment {
    fn label(&self) -> &str {
        &self.label
    }

    fn agents(&self) -> usize {
        self.base.agents()
    }

    fn charge(&self, reports: &[Report]) -> Result<Vec<f64>> {
        let mut p = self.base.charge(reports)?;
        for (p, r) in p.iter_mut().zip(reports) {
            if !r.is_absent() {
                *p += self.delta;
            }
        }
        Ok(p)
    }
}

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::profile::Report;
use crate::quality::QualityFunction;
use crate::valuation::{LinearExternalityModel, Valuation};

use super::{deploy, own_qualities, reported_types};

/// Maps a report profile to allocated model qualities.
pub trait AllocationRule: Send + Sync {
    fn label(&self) -> &str;

    fn agents(&self) -> usize;

    fn allocate(&self, reports: &[Report]) -> Result<Vec<f64>>;
}

pub(crate) fn check_len(n: usize, reports: &[Report]) -> Result<()> {
    if reports.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: reports.len(),
        });
    }
    Ok(())
}

fn pooled_quality(quality: &QualityFunction, reports: &[Report]) -> Result<f64> {
    quality.evaluate(reports.iter().map(|r| r.contribution()).sum())
}

/// Gives every participant the model trained on all contributed data.
#[derive(Debug, Clone)]
pub struct BestModelAllocation {
    n: usize,
    quality: QualityFunction,
}

impl BestModelAllocation {
    pub fn new(n: usize, quality: QualityFunction) -> Self {
        Self { n, quality }
    }
}

impl AllocationRule for BestModelAllocation {
    fn label(&self) -> &str {
        "best-model"
    }

    fn agents(&self) -> usize {
        self.n
    }

    fn allocate(&self, reports: &[Report]) -> Result<Vec<f64>> {
        check_len(self.n, reports)?;
        let best = pooled_quality(&self.quality, reports)?;
        Ok(reports
            .iter()
            .map(|r| if r.is_absent() { 0.0 } else { best })
            .collect())
    }
}

/// Welfare-maximizing allocation for linear externalities: the pooled model
/// goes to agents whose column sum `Σ_j α_ji` is nonnegative. Everyone else
/// is floored at the quality of its own reported data.
#[derive(Debug, Clone)]
pub struct EfficientLinearAllocation {
    serve: Vec<bool>,
    quality: QualityFunction,
}

impl EfficientLinearAllocation {
    pub fn new(model: &LinearExternalityModel, quality: QualityFunction) -> Self {
        let serve = (0..model.agents()).map(|i| model.column_sum(i) >= 0.0).collect();
        Self { serve, quality }
    }
}

impl AllocationRule for EfficientLinearAllocation {
    fn label(&self) -> &str {
        "efficient-linear"
    }

    fn agents(&self) -> usize {
        self.serve.len()
    }

    fn allocate(&self, reports: &[Report]) -> Result<Vec<f64>> {
        check_len(self.serve.len(), reports)?;
        let best = pooled_quality(&self.quality, reports)?;
        reports
            .iter()
            .zip(&self.serve)
            .map(|(r, &serve)| match r {
                Report::Absent => Ok(0.0),
                Report::Size(_) if serve => Ok(best),
                Report::Size(s) => self.quality.evaluate(*s),
            })
            .collect()
    }
}

/// One point of the give/withhold lattice: agents whose bit is set in `mask`
/// receive the pooled model, the other participants their own-data model.
#[derive(Debug, Clone)]
pub struct GiveWithholdAllocation {
    mask: u64,
    n: usize,
    quality: QualityFunction,
    label: String,
}

impl GiveWithholdAllocation {
    pub fn new(n: usize, mask: u64, quality: QualityFunction) -> Self {
        let label = format!("give-withhold:{mask:0width$b}", width = n);
        Self {
            mask,
            n,
            quality,
            label,
        }
    }
}

impl AllocationRule for GiveWithholdAllocation {
    fn label(&self) -> &str {
        &self.label
    }

    fn agents(&self) -> usize {
        self.n
    }

    fn allocate(&self, reports: &[Report]) -> Result<Vec<f64>> {
        check_len(self.n, reports)?;
        let best = pooled_quality(&self.quality, reports)?;
        reports
            .iter()
            .enumerate()
            .map(|(i, r)| match r {
                Report::Absent => Ok(0.0),
                Report::Size(_) if self.mask >> i & 1 == 1 => Ok(best),
                Report::Size(s) => self.quality.evaluate(*s),
            })
            .collect()
    }
}

/// The `2^n` give/withhold allocations, give-to-everyone first.
pub fn give_withhold_family(n: usize, quality: &QualityFunction) -> Vec<Arc<dyn AllocationRule>> {
    assert!(n < 64, "lattice over {n} agents is too large");
    let full = (1u64 << n) - 1;
    (0..=full)
        .rev()
        .map(|mask| Arc::new(GiveWithholdAllocation::new(n, mask, quality.clone())) as Arc<dyn AllocationRule>)
        .collect()
}

/// Picks the family member with the highest reported welfare, ties going to
/// the earliest member.
pub struct WelfareMaxAllocation {
    family: Vec<Arc<dyn AllocationRule>>,
    model: Arc<dyn Valuation>,
    quality: QualityFunction,
}

impl WelfareMaxAllocation {
    pub fn new(
        family: Vec<Arc<dyn AllocationRule>>,
        model: Arc<dyn Valuation>,
        quality: QualityFunction,
    ) -> Result<Self> {
        if family.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let n = model.agents();
        if let Some(rule) = family.iter().find(|r| r.agents() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: rule.agents(),
            });
        }
        Ok(Self {
            family,
            model,
            quality,
        })
    }

    /// Index of the chosen member and its allocation.
    pub fn choose(&self, reports: &[Report]) -> Result<(usize, Vec<f64>)> {
        let own = own_qualities(&self.quality, &reported_types(reports))?;
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for (k, rule) in self.family.iter().enumerate() {
            let x = rule.allocate(reports)?;
            let welfare: f64 = self.model.values(&deploy(&x, &own))?.iter().sum();
            if best.as_ref().is_none_or(|(_, _, w)| welfare > *w) {
                best = Some((k, x, welfare));
            }
        }
        let (k, x, _) = best.expect("family is non-empty");
        Ok((k, x))
    }
}

impl AllocationRule for WelfareMaxAllocation {
    fn label(&self) -> &str {
        "welfare-max"
    }

    fn agents(&self) -> usize {
        self.model.agents()
    }

    fn allocate(&self, reports: &[Report]) -> Result<Vec<f64>> {
        check_len(self.agents(), reports)?;
        Ok(self.choose(reports)?.1)
    }
}

/// Free-function form of [`EfficientLinearAllocation`].
pub fn efficient_allocation_linear(
    model: &LinearExternalityModel,
    quality: &QualityFunction,
    reports: &[Report],
) -> Result<Vec<f64>> {
    EfficientLinearAllocation::new(model, quality.clone()).allocate(reports)
}

/// Free-function form of [`BestModelAllocation`].
pub fn best_model_allocation(quality: &QualityFunction, reports: &[Report]) -> Result<Vec<f64>> {
    BestModelAllocation::new(reports.len(), quality.clone()).allocate(reports)
}

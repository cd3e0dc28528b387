use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mechanism::{deploy, AllocationRule, Mechanism};
use crate::profile::{GridSpec, Lattice, Report};
use crate::quality::QualityFunction;
use crate::valuation::Valuation;

use super::{AuditReport, Deviation, Property, Violation};

/// Allocations and payments of a mechanism at every report profile over
/// `{∅} ∪ grid`. Digit 0 encodes `∅`, digit `k + 1` the `k`-th grid size.
struct OutcomeTable {
    n: usize,
    sizes: Vec<f64>,
    own: Vec<f64>,
    reports: Lattice,
    x: Vec<f64>,
    p: Vec<f64>,
}

impl OutcomeTable {
    fn build(mech: &Mechanism, quality: Option<&QualityFunction>, grid: &GridSpec) -> Result<Self> {
        let n = mech.agents();
        let sizes = grid.sizes();
        let own = match quality {
            Some(q) => sizes.iter().map(|&s| q.evaluate(s)).collect::<Result<_>>()?,
            None => vec![0.0; sizes.len()],
        };
        let reports = Lattice {
            radix: sizes.len() + 1,
            len: n,
        };
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..reports.count())
            .into_par_iter()
            .map(|code| {
                let mut digits = vec![0; n];
                reports.decode(code, &mut digits);
                let r: Vec<Report> = digits
                    .iter()
                    .map(|&d| if d == 0 { Report::Absent } else { Report::Size(sizes[d - 1]) })
                    .collect();
                Ok((mech.allocate(&r)?, mech.charge(&r)?))
            })
            .collect::<Result<_>>()?;
        let mut x = Vec::with_capacity(rows.len() * n);
        let mut p = Vec::with_capacity(rows.len() * n);
        for (xr, pr) in rows {
            x.extend(xr);
            p.extend(pr);
        }
        Ok(Self {
            n,
            sizes,
            own,
            reports,
            x,
            p,
        })
    }

    fn truthful(&self) -> Lattice {
        Lattice {
            radix: self.sizes.len(),
            len: self.n,
        }
    }

    fn x(&self, code: usize) -> &[f64] {
        &self.x[code * self.n..(code + 1) * self.n]
    }

    fn p(&self, code: usize) -> &[f64] {
        &self.p[code * self.n..(code + 1) * self.n]
    }

    /// Runs `visit` over every truthful profile in parallel, with the grid
    /// digits, the report-table code and the own-data qualities.
    fn scan<F>(&self, visit: F) -> Result<(usize, Vec<Violation>)>
    where
        F: Fn(&[usize], usize, &[f64], &mut Vec<Violation>) -> Result<usize> + Sync,
    {
        let truthful = self.truthful();
        let parts: Vec<(usize, Vec<Violation>)> = (0..truthful.count())
            .into_par_iter()
            .map(|code| {
                let mut digits = vec![0; self.n];
                truthful.decode(code, &mut digits);
                let shifted: Vec<usize> = digits.iter().map(|d| d + 1).collect();
                let own: Vec<f64> = digits.iter().map(|&d| self.own[d]).collect();
                let mut found = Vec::new();
                let checks = visit(&digits, self.reports.encode(&shifted), &own, &mut found)?;
                Ok((checks, found))
            })
            .collect::<Result<_>>()?;
        let checks = parts.iter().map(|(c, _)| c).sum();
        Ok((checks, parts.into_iter().flat_map(|(_, v)| v).collect()))
    }

    fn profile(&self, digits: &[usize]) -> Vec<f64> {
        digits.iter().map(|&d| self.sizes[d]).collect()
    }

    /// Table code with agent `i`'s report digit replaced.
    fn with_digit(&self, code: usize, i: usize, digit: usize) -> usize {
        let place = self.reports.radix.pow((self.n - 1 - i) as u32);
        let current = code / place % self.reports.radix;
        code - current * place + digit * place
    }
}

fn check_agents(mech: &Mechanism, model: &dyn Valuation) -> Result<()> {
    if mech.agents() != model.agents() {
        return Err(Error::DimensionMismatch {
            expected: mech.agents(),
            actual: model.agents(),
        });
    }
    Ok(())
}

/// Incentive compatibility: at every truthful profile, no agent gains by
/// reporting a smaller grid type while the others stay truthful.
pub fn audit_ic(
    mech: &Mechanism,
    model: &dyn Valuation,
    quality: &QualityFunction,
    grid: &GridSpec,
    tol: f64,
) -> Result<AuditReport> {
    check_agents(mech, model)?;
    let table = OutcomeTable::build(mech, Some(quality), grid)?;
    let (checks, violations) = table.scan(|digits, code, own, found| {
        let q = deploy(table.x(code), own);
        let mut checks = 0;
        for (i, &d) in digits.iter().enumerate() {
            let honest = model.value_of(i, &q)? - table.p(code)[i];
            for lower in 0..d {
                let dev = table.with_digit(code, i, lower + 1);
                let lie = model.value_of(i, &deploy(table.x(dev), own))? - table.p(dev)[i];
                checks += 1;
                let margin = honest - lie;
                if margin < -tol {
                    found.push(Violation {
                        check: Property::Ic,
                        profile: table.profile(digits),
                        agent: Some(i),
                        deviation: Some(Deviation::Report(table.sizes[lower])),
                        margin,
                        detail: None,
                    });
                }
            }
        }
        Ok(checks)
    })?;
    Ok(AuditReport::new(Property::Ic, grid, tol, checks, violations))
}

/// Individual rationality: truthful participation is at least as good as
/// staying out.
pub fn audit_ir(
    mech: &Mechanism,
    model: &dyn Valuation,
    quality: &QualityFunction,
    grid: &GridSpec,
    tol: f64,
) -> Result<AuditReport> {
    check_agents(mech, model)?;
    let table = OutcomeTable::build(mech, Some(quality), grid)?;
    let (checks, violations) = table.scan(|digits, code, own, found| {
        let q = deploy(table.x(code), own);
        for i in 0..digits.len() {
            let honest = model.value_of(i, &q)? - table.p(code)[i];
            let exit = table.with_digit(code, i, 0);
            let out = model.value_of(i, &deploy(table.x(exit), own))?;
            let margin = honest - out;
            if margin < -tol {
                found.push(Violation {
                    check: Property::Ir,
                    profile: table.profile(digits),
                    agent: Some(i),
                    deviation: Some(Deviation::Exit),
                    margin,
                    detail: None,
                });
            }
        }
        Ok(digits.len())
    })?;
    Ok(AuditReport::new(Property::Ir, grid, tol, checks, violations))
}

/// IR slack of `agent` at a single truthful profile.
pub fn ir_margin(
    mech: &Mechanism,
    model: &dyn Valuation,
    quality: &QualityFunction,
    truth: &[f64],
    agent: usize,
) -> Result<f64> {
    let reports: Vec<Report> = truth.iter().map(|&t| Report::Size(t)).collect();
    let honest = mech.run(model, quality, truth, &reports)?;
    let mut exit = reports;
    exit[agent] = Report::Absent;
    let out = mech.run(model, quality, truth, &exit)?;
    Ok(honest.utilities[agent] - out.utilities[agent])
}

/// Weak budget balance: revenue is nonnegative at every truthful profile.
pub fn audit_wbb(mech: &Mechanism, grid: &GridSpec, tol: f64) -> Result<AuditReport> {
    let table = OutcomeTable::build(mech, None, grid)?;
    let (checks, violations) = table.scan(|digits, code, _, found| {
        let revenue: f64 = table.p(code).iter().sum();
        if revenue < -tol {
            found.push(Violation {
                check: Property::Wbb,
                profile: table.profile(digits),
                agent: None,
                deviation: None,
                margin: revenue,
                detail: None,
            });
        }
        Ok(1)
    })?;
    Ok(AuditReport::new(Property::Wbb, grid, tol, checks, violations))
}

/// Efficiency: at every truthful profile the mechanism's allocation reaches
/// the best welfare available in `family`.
pub fn audit_efficiency(
    mech: &Mechanism,
    model: &dyn Valuation,
    quality: &QualityFunction,
    grid: &GridSpec,
    family: &[Arc<dyn AllocationRule>],
    tol: f64,
) -> Result<AuditReport> {
    check_agents(mech, model)?;
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let table = OutcomeTable::build(mech, Some(quality), grid)?;
    let (checks, violations) = table.scan(|digits, code, own, found| {
        let welfare = |x: &[f64]| -> Result<f64> { Ok(model.values(&deploy(x, own))?.iter().sum()) };
        let ours = welfare(table.x(code))?;
        let reports: Vec<Report> = table.profile(digits).into_iter().map(Report::Size).collect();
        let mut best: Option<(f64, &str)> = None;
        for rule in family {
            let w = welfare(&rule.allocate(&reports)?)?;
            if best.is_none_or(|(b, _)| w > b) {
                best = Some((w, rule.label()));
            }
        }
        let (best, label) = best.expect("family is non-empty");
        let margin = ours - best;
        if margin < -tol {
            found.push(Violation {
                check: Property::Efficiency,
                profile: table.profile(digits),
                agent: None,
                deviation: Some(Deviation::Allocation(label.to_string())),
                margin,
                detail: None,
            });
        }
        Ok(family.len())
    })?;
    Ok(AuditReport::new(Property::Efficiency, grid, tol, checks, violations))
}

/// IC, IR, efficiency and weak budget balance together.
pub fn audit_desirable(
    mech: &Mechanism,
    model: &dyn Valuation,
    quality: &QualityFunction,
    grid: &GridSpec,
    family: &[Arc<dyn AllocationRule>],
    tol: f64,
) -> Result<AuditReport> {
    let parts = [
        audit_ic(mech, model, quality, grid, tol)?,
        audit_ir(mech, model, quality, grid, tol)?,
        audit_efficiency(mech, model, quality, grid, family, tol)?,
        audit_wbb(mech, grid, tol)?,
    ];
    let checks = parts.iter().map(|r| r.checks).sum();
    let violations = parts.into_iter().flat_map(|r| r.violations).collect();
    Ok(AuditReport::new(Property::Desirable, grid, tol, checks, violations))
}

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mechanism::{deploy, own_qualities, Mechanism};
use crate::numeric::{cumulative_trapezoid, derivative, refine};
use crate::profile::{GridSpec, Lattice, Report};
use crate::quality::QualityFunction;
use crate::valuation::{fd_partial, DerivativeSupport, Valuation};

use super::{AuditReport, Deviation, Property, Violation};

/// Default step for both the finite differences and the trapezoid mesh.
pub const QUAD_STEP: f64 = 1e-3;

/// One agent against a fixed truthful profile of the others.
struct Slice<'a> {
    mech: &'a Mechanism,
    model: &'a dyn Valuation,
    quality: &'a QualityFunction,
    agent: usize,
    others: Vec<f64>,
    upper: f64,
    h: f64,
}

impl Slice<'_> {
    fn reports(&self, r: Report) -> Vec<Report> {
        let mut out: Vec<Report> = self.others.iter().map(|&t| Report::Size(t)).collect();
        out[self.agent] = r;
        out
    }

    fn truth(&self, s: f64) -> Vec<f64> {
        let mut t = self.others.clone();
        t[self.agent] = s;
        t
    }

    fn deployed(&self, r: Report, s: f64) -> Result<Vec<f64>> {
        let x = self.mech.allocate(&self.reports(r))?;
        Ok(deploy(&x, &own_qualities(self.quality, &self.truth(s))?))
    }

    fn value(&self, r: Report, s: f64) -> Result<f64> {
        self.model.value_of(self.agent, &self.deployed(r, s)?)
    }

    fn payment(&self, r: f64) -> Result<f64> {
        Ok(self.mech.charge(&self.reports(Report::Size(r)))?[self.agent])
    }

    fn partial(&self, q: &[f64], j: usize) -> Result<f64> {
        match self.model.partial(q, self.agent, j) {
            Some(d) => Ok(d),
            None => fd_partial(self.model, q, self.agent, j, self.h, f64::INFINITY),
        }
    }

    /// `∂v_i(x(r, t_{-i}), s, t_{-i}) / ∂r` by the chain rule
    /// `Σ_j ∂v_i/∂q_j · ∂q_j/∂r`, differencing the deployed qualities.
    fn report_derivative(&self, r: f64, s: f64) -> Result<f64> {
        let q = self.deployed(Report::Size(r), s)?;
        let (h, n) = (self.h, q.len());
        let (down, up) = (r - h >= 0.0, r + h <= self.upper);
        let (lo, hi, width) = match (down, up) {
            (true, true) => (r - h, r + h, 2.0 * h),
            (false, true) => (r, r + h, h),
            (true, false) => (r - h, r, h),
            (false, false) => return Ok(0.0),
        };
        let q_lo = self.deployed(Report::Size(lo), s)?;
        let q_hi = self.deployed(Report::Size(hi), s)?;
        let mut total = 0.0;
        for j in 0..n {
            let dq = (q_hi[j] - q_lo[j]) / width;
            if dq != 0.0 {
                total += self.partial(&q, j)? * dq;
            }
        }
        Ok(total)
    }

    /// `∂v_i(x(∅, t_{-i}), s, t_{-i}) / ∂s`.
    fn exit_derivative(&self, s: f64) -> Result<f64> {
        derivative(|s| self.value(Report::Absent, s), s, self.h, 0.0, self.upper)
    }

    fn profile_at(&self, s: f64) -> Vec<f64> {
        self.truth(s)
    }

    /// `p_i(0, t_{-i})` against its participation bound at true type zero.
    fn zero_report_margin(&self) -> Result<f64> {
        let bound = self.value(Report::Size(0.0), 0.0)? - self.value(Report::Absent, 0.0)?;
        Ok(bound - self.payment(0.0)?)
    }
}

fn prepare(model: &dyn Valuation, mech: &Mechanism, h: f64) -> Result<()> {
    if model.derivative_support() == DerivativeSupport::None {
        return Err(Error::NotDifferentiable(model.label().to_string()));
    }
    if mech.agents() != model.agents() {
        return Err(Error::DimensionMismatch {
            expected: mech.agents(),
            actual: model.agents(),
        });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("quadrature step {h} must be positive")));
    }
    Ok(())
}

/// Every `(agent, t_{-i})` slice over the truthful grid, in lexicographic
/// order.
fn slices(n: usize, sizes: &[f64]) -> Vec<(usize, Vec<f64>)> {
    let lattice = Lattice {
        radix: sizes.len(),
        len: n - 1,
    };
    let mut out = Vec::new();
    let mut digits = vec![0; n - 1];
    for i in 0..n {
        for code in 0..lattice.count() {
            lattice.decode(code, &mut digits);
            let mut others: Vec<f64> = digits.iter().map(|&d| sizes[d]).collect();
            others.insert(i, 0.0);
            out.push((i, others));
        }
    }
    out
}

fn violation(check: Property, slice: &Slice<'_>, s: f64, deviation: Option<Deviation>, margin: f64, tag: &str) -> Violation {
    Violation {
        check,
        profile: slice.profile_at(s),
        agent: Some(slice.agent),
        deviation,
        margin,
        detail: Some(tag.to_string()),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Necessary,
    Sufficient,
}

fn check(
    mode: Mode,
    mech: &Mechanism,
    model: &dyn Valuation,
    quality: &QualityFunction,
    grid: &GridSpec,
    h: f64,
    tol: f64,
) -> Result<AuditReport> {
    prepare(model, mech, h)?;
    let property = match mode {
        Mode::Necessary => Property::NecessaryCondition,
        Mode::Sufficient => Property::SufficientCondition,
    };
    let sizes = grid.sizes();
    let (mesh, at) = refine(&sizes, h);
    let parts: Vec<(usize, Vec<Violation>)> = slices(model.agents(), &sizes)
        .into_par_iter()
        .map(|(agent, others)| {
            let slice = Slice {
                mech,
                model,
                quality,
                agent,
                others,
                upper: grid.upper_bound(),
                h,
            };
            let mut found = Vec::new();
            let mut checks = 1;

            let m = slice.zero_report_margin()?;
            if m < -tol {
                found.push(violation(property, &slice, 0.0, None, m, "eq1"));
            }

            let diag: Vec<f64> = mesh.iter().map(|&s| slice.report_derivative(s, s)).collect::<Result<_>>()?;
            let along = cumulative_trapezoid(&mesh, &diag);
            let exit = if mode == Mode::Sufficient {
                let e: Vec<f64> = mesh.iter().map(|&s| slice.exit_derivative(s)).collect::<Result<_>>()?;
                cumulative_trapezoid(&mesh, &e)
            } else {
                vec![0.0; mesh.len()]
            };
            let pay: Vec<f64> = sizes.iter().map(|&s| slice.payment(s)).collect::<Result<_>>()?;

            for hi in 0..sizes.len() {
                for lo in 0..hi {
                    checks += 1;
                    let budget = along[at[hi]] - along[at[lo]] - (exit[at[hi]] - exit[at[lo]]);
                    let m = budget - (pay[hi] - pay[lo]);
                    if m < -tol {
                        let tag = if mode == Mode::Necessary { "eq2" } else { "eq4" };
                        let dev = Some(Deviation::Pair(sizes[lo], sizes[hi]));
                        found.push(violation(property, &slice, sizes[hi], dev, m, tag));
                    }
                }
            }

            if mode == Mode::Sufficient {
                // the report derivative must be smallest when the true type
                // equals the report
                for (lo, &r) in sizes.iter().enumerate() {
                    let base = diag[at[lo]];
                    for &s in &sizes[lo + 1..] {
                        checks += 1;
                        let m = slice.report_derivative(r, s)? - base;
                        if m < -tol {
                            found.push(violation(property, &slice, s, Some(Deviation::Report(r)), m, "eq3"));
                        }
                    }
                }
            }
            Ok((checks, found))
        })
        .collect::<Result<_>>()?;
    let checks = parts.iter().map(|(c, _)| c).sum();
    let violations = parts.into_iter().flat_map(|(_, v)| v).collect();
    Ok(AuditReport::new(property, grid, tol, checks, violations))
}

/// Checks the payment conditions every IC and IR mechanism satisfies: the
/// zero-report participation bound and the bound of each payment increase
/// by the integrated report derivative of the agent's value along the
/// diagonal. Integrals use the composite trapezoid rule at step `h`.
pub fn check_necessary_conditions(
    mech: &Mechanism,
    model: &dyn Valuation,
    quality: &QualityFunction,
    grid: &GridSpec,
    h: f64,
    tol: f64,
) -> Result<AuditReport> {
    check(Mode::Necessary, mech, model, quality, grid, h, tol)
}

/// Checks the sufficient conditions for IC and IR: the zero-report bound,
/// minimality of the report derivative at the diagonal over grid types above
/// the report, and the payment-increase bound net of the exit-value growth.
pub fn check_sufficient_conditions(
    mech: &Mechanism,
    model: &dyn Valuation,
    quality: &QualityFunction,
    grid: &GridSpec,
    h: f64,
    tol: f64,
) -> Result<AuditReport> {
    check(Mode::Sufficient, mech, model, quality, grid, h, tol)
}

//! Existence of a desirable mechanism for a fixed allocation rule.
//!
//! IC and IR constraints on payments reduce, slice by slice, to a system of
//! difference constraints whose maximal solution is a shortest-path tree.
//! A desirable mechanism exists exactly when those maximal payments keep
//! the budget weakly balanced at every truthful profile.

mod boundary;
mod graph;
mod oracle;
mod table;

use rayon::prelude::*;

pub use boundary::{disparity_boundary, disparity_boundary_full, BoundaryResult};
pub use graph::{ConstraintGraph, Edge};
pub use oracle::{brute_force_oracle, ORACLE_MAX_AGENTS, ORACLE_MAX_INTERVALS};
pub use table::{PaymentRow, PaymentTable, TablePayment, TableSlack};

use crate::error::{Error, Result};
use crate::mechanism::{deploy, AllocationRule};
use crate::profile::{GridSpec, Lattice, Report};
use crate::quality::QualityFunction;
use crate::valuation::Valuation;

/// Budget tolerance: `Σ p_max ≥ −BUDGET_TOL` counts as balanced.
pub const BUDGET_TOL: f64 = 1e-9;

fn check_agents(model: &dyn Valuation, alloc: &dyn AllocationRule, agent: usize, others: usize) -> Result<usize> {
    let n = model.agents();
    if alloc.agents() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: alloc.agents(),
        });
    }
    if agent >= n {
        return Err(Error::InvalidArgument(format!("agent {agent} out of range for {n} agents")));
    }
    if others + 1 != n {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            actual: others,
        });
    }
    Ok(n)
}

fn with_own(agent: usize, own: Report, others: &[Report]) -> Vec<Report> {
    let mut reports = Vec::with_capacity(others.len() + 1);
    reports.extend_from_slice(&others[..agent]);
    reports.push(own);
    reports.extend_from_slice(&others[agent..]);
    reports
}

/// Per-slice evaluator: allocations at every report of `agent` are computed
/// once, and values are taken with the agent's true type plugged into its
/// own-data quality.
struct SliceEval<'a> {
    model: &'a dyn Valuation,
    agent: usize,
    own_at: Vec<f64>,
    own: Vec<f64>,
    x_in: Vec<Vec<f64>>,
    x_out: Vec<f64>,
}

impl<'a> SliceEval<'a> {
    fn new(
        model: &'a dyn Valuation,
        quality: &QualityFunction,
        alloc: &dyn AllocationRule,
        agent: usize,
        others: &[Report],
        sizes: &[f64],
    ) -> Result<Self> {
        let own_at = sizes.iter().map(|&s| quality.evaluate(s)).collect::<Result<Vec<_>>>()?;
        let own = with_own(agent, Report::Absent, others)
            .iter()
            .map(|r| quality.evaluate(r.contribution()))
            .collect::<Result<Vec<_>>>()?;
        let x_in = sizes
            .iter()
            .map(|&s| alloc.allocate(&with_own(agent, Report::Size(s), others)))
            .collect::<Result<Vec<_>>>()?;
        let x_out = alloc.allocate(&with_own(agent, Report::Absent, others))?;
        Ok(Self {
            model,
            agent,
            own_at,
            own,
            x_in,
            x_out,
        })
    }

    fn value(&self, x: &[f64], truth: usize) -> Result<f64> {
        let mut own = self.own.clone();
        own[self.agent] = self.own_at[truth];
        self.model.value_of(self.agent, &deploy(x, &own))
    }

    fn upper(&self, k: usize) -> Result<f64> {
        Ok(self.value(&self.x_in[k], k)? - self.value(&self.x_out, k)?)
    }

    fn gap(&self, lower: usize, k: usize) -> Result<f64> {
        Ok(self.value(&self.x_in[k], k)? - self.value(&self.x_in[lower], k)?)
    }

    fn graph(&self) -> Result<ConstraintGraph> {
        let upper = (0..self.x_in.len()).map(|k| self.upper(k)).collect::<Result<Vec<_>>>()?;
        ConstraintGraph::build(&upper, |lo, hi| self.gap(lo, hi))
    }
}

/// Participation bound `p̄(t_i, t_{-i})`: the value agent `agent` with true
/// type `t_i` gets from reporting truthfully, minus its value when it exits.
///
/// `others` lists the other agents' reports in index order; absent entries
/// count as type zero.
pub fn payment_upper_bound(
    model: &dyn Valuation,
    quality: &QualityFunction,
    alloc: &dyn AllocationRule,
    agent: usize,
    t_i: f64,
    others: &[Report],
) -> Result<f64> {
    check_agents(model, alloc, agent, others.len())?;
    SliceEval::new(model, quality, alloc, agent, others, &[t_i])?.upper(0)
}

/// Gap bound `Gap_i(t'_i, t_i, t_{-i})` on `p(t_i) − p(t'_i)`.
///
/// Both terms use the true type `t_i`, so in the under-reporting scenario
/// the agent still deploys `max{x_i(t'_i, t_{-i}), Q(t_i)}`.
pub fn gap(
    model: &dyn Valuation,
    quality: &QualityFunction,
    alloc: &dyn AllocationRule,
    agent: usize,
    reported: f64,
    t_i: f64,
    others: &[Report],
) -> Result<f64> {
    check_agents(model, alloc, agent, others.len())?;
    if reported > t_i {
        return Err(Error::OverReport {
            agent,
            report: reported,
            truth: t_i,
        });
    }
    SliceEval::new(model, quality, alloc, agent, others, &[reported, t_i])?.gap(0, 1)
}

/// Builds the constraint graph of one slice over the grid sizes.
pub fn slice_graph(
    model: &dyn Valuation,
    quality: &QualityFunction,
    alloc: &dyn AllocationRule,
    agent: usize,
    others: &[Report],
    grid: &GridSpec,
) -> Result<ConstraintGraph> {
    check_agents(model, alloc, agent, others.len())?;
    SliceEval::new(model, quality, alloc, agent, others, &grid.sizes())?.graph()
}

/// Maximal payments of `agent` at every grid report, holding the others'
/// reports fixed at `others`.
pub fn max_payments_slice(
    model: &dyn Valuation,
    quality: &QualityFunction,
    alloc: &dyn AllocationRule,
    agent: usize,
    others: &[Report],
    grid: &GridSpec,
) -> Result<Vec<f64>> {
    Ok(slice_graph(model, quality, alloc, agent, others, grid)?.forward_pass())
}

pub(crate) fn slice_reports(digits: &[usize], sizes: &[f64]) -> Vec<Report> {
    digits
        .iter()
        .map(|&d| if d == 0 { Report::Absent } else { Report::Size(sizes[d - 1]) })
        .collect()
}

/// Runs the existence algorithm: maximal payments for every agent and every
/// slice of the others' reports over `{∅} ∪ grid`, then the budget check at
/// every truthful profile in `grid^n`.
///
/// The returned table is infeasible, with the first violating profile as
/// witness, when some profile has `Σ_i p_max < −tol`.
pub fn desirable_exists(
    model: &dyn Valuation,
    quality: &QualityFunction,
    alloc: &dyn AllocationRule,
    grid: &GridSpec,
    tol: f64,
) -> Result<PaymentTable> {
    let n = check_agents(model, alloc, 0, model.agents().saturating_sub(1))?;
    let sizes = grid.sizes();
    let m = sizes.len();
    let slices = Lattice {
        radix: m + 1,
        len: n - 1,
    };
    let p_max: Vec<Vec<f64>> = (0..n * slices.count())
        .into_par_iter()
        .map(|job| {
            let (agent, code) = (job / slices.count(), job % slices.count());
            let mut digits = vec![0; n - 1];
            slices.decode(code, &mut digits);
            let others = slice_reports(&digits, &sizes);
            Ok(SliceEval::new(model, quality, alloc, agent, &others, &sizes)?
                .graph()?
                .forward_pass())
        })
        .collect::<Result<_>>()?;
    let mut table = PaymentTable::from_slices(*grid, n, p_max.concat());
    table.check_budget(tol);
    Ok(table)
}

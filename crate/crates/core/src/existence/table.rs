use std::fmt::Write as _;
use std::io;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{AllocationRule, Mechanism, PaymentRule};
use crate::profile::{GridSpec, Lattice, Report};
use crate::quality::QualityFunction;
use crate::valuation::Valuation;

use super::{slice_reports, SliceEval};

/// Maximal feasible payments from the existence algorithm.
///
/// Entries are indexed by agent, the others' reports over `{∅} ∪ grid`,
/// and the agent's own grid report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentTable {
    grid: GridSpec,
    agents: usize,
    feasible: bool,
    witness: Option<Vec<f64>>,
    p_max: Vec<f64>,
}

/// One table entry in flat form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentRow {
    pub agent: usize,
    pub t_i: f64,
    pub others: Vec<Report>,
    pub p_max: f64,
}

/// Result of re-checking a table against its constraints.
///
/// `min_slack` is the smallest slack over all participation and gap
/// constraints; `max_headroom` is the largest amount by which any single
/// entry could still rise before hitting its tightest constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableSlack {
    pub min_slack: f64,
    pub max_headroom: f64,
}

impl PaymentTable {
    pub(crate) fn from_slices(grid: GridSpec, agents: usize, p_max: Vec<f64>) -> Self {
        Self {
            grid,
            agents,
            feasible: true,
            witness: None,
            p_max,
        }
    }

    fn points(&self) -> usize {
        self.grid.intervals() + 1
    }

    fn slices(&self) -> Lattice {
        Lattice {
            radix: self.points() + 1,
            len: self.agents - 1,
        }
    }

    fn index(&self, agent: usize, slice: usize, k: usize) -> usize {
        (agent * self.slices().count() + slice) * self.points() + k
    }

    pub(crate) fn check_budget(&mut self, tol: f64) {
        let n = self.agents;
        let profiles = Lattice {
            radix: self.points(),
            len: n,
        };
        let slices = self.slices();
        let mut digits = vec![0; n];
        let mut others = Vec::with_capacity(n - 1);
        for code in 0..profiles.count() {
            profiles.decode(code, &mut digits);
            let mut revenue = 0.0;
            for i in 0..n {
                others.clear();
                others.extend(digits.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &d)| d + 1));
                revenue += self.p_max[self.index(i, slices.encode(&others), digits[i])];
            }
            if revenue < -tol {
                self.feasible = false;
                self.witness = Some(digits.iter().map(|&d| self.grid.size_at(d)).collect());
                return;
            }
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible
    }

    /// First truthful profile, in lexicographic grid order, whose maximal
    /// payments sum below the tolerance.
    pub fn witness(&self) -> Option<&[f64]> {
        self.witness.as_deref()
    }

    fn digit(&self, r: Report) -> Option<usize> {
        match r {
            Report::Absent => Some(0),
            Report::Size(s) => self.grid.index_of(s).map(|k| k + 1),
        }
    }

    /// `p_max(t_i, t_{-i})` for agent `agent`, or `None` off the grid.
    /// `others` lists the other agents' reports in index order.
    pub fn get(&self, agent: usize, t_i: f64, others: &[Report]) -> Option<f64> {
        if agent >= self.agents || others.len() + 1 != self.agents {
            return None;
        }
        let k = self.grid.index_of(t_i)?;
        let digits = others.iter().map(|&r| self.digit(r)).collect::<Option<Vec<_>>>()?;
        Some(self.p_max[self.index(agent, self.slices().encode(&digits), k)])
    }

    /// Payment of `agent` at a full report profile; absent agents pay zero.
    pub fn payment(&self, agent: usize, reports: &[Report]) -> Result<f64> {
        let Report::Size(t_i) = reports[agent] else {
            return Ok(0.0);
        };
        let others: Vec<Report> = reports
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != agent)
            .map(|(_, &r)| r)
            .collect();
        self.get(agent, t_i, &others).ok_or_else(|| {
            Error::InvalidArgument(format!("report profile {reports:?} is not on the payment table's grid"))
        })
    }

    /// Sum of maximal payments at a truthful profile.
    pub fn revenue_at(&self, truth: &[f64]) -> Result<f64> {
        let reports: Vec<Report> = truth.iter().map(|&t| Report::Size(t)).collect();
        (0..self.agents).map(|i| self.payment(i, &reports)).sum()
    }

    pub fn rows(&self) -> Vec<PaymentRow> {
        let sizes = self.grid.sizes();
        let slices = self.slices();
        let mut digits = vec![0; self.agents - 1];
        let mut rows = Vec::with_capacity(self.p_max.len());
        for agent in 0..self.agents {
            for code in 0..slices.count() {
                slices.decode(code, &mut digits);
                let others = slice_reports(&digits, &sizes);
                for (k, &t_i) in sizes.iter().enumerate() {
                    rows.push(PaymentRow {
                        agent,
                        t_i,
                        others: others.clone(),
                        p_max: self.p_max[self.index(agent, code, k)],
                    });
                }
            }
        }
        rows
    }

    /// CSV with columns `agent,t_i,others,p_max`; the others' reports are
    /// `;`-separated with `none` for an absent agent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent,t_i,others,p_max\n");
        for row in self.rows() {
            let others: Vec<String> = row.others.iter().map(|r| r.to_string()).collect();
            let _ = writeln!(out, "{},{},{},{}", row.agent, row.t_i, others.join(";"), row.p_max);
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    /// Re-derives every participation and gap constraint from the model and
    /// measures how the stored payments sit against them.
    pub fn slack(
        &self,
        model: &dyn Valuation,
        quality: &QualityFunction,
        alloc: &dyn AllocationRule,
    ) -> Result<TableSlack> {
        let sizes = self.grid.sizes();
        let slices = self.slices();
        let mut digits = vec![0; self.agents - 1];
        let mut out = TableSlack {
            min_slack: f64::INFINITY,
            max_headroom: f64::NEG_INFINITY,
        };
        for agent in 0..self.agents {
            for code in 0..slices.count() {
                slices.decode(code, &mut digits);
                let others = slice_reports(&digits, &sizes);
                let eval = SliceEval::new(model, quality, alloc, agent, &others, &sizes)?;
                let p = |k: usize| self.p_max[self.index(agent, code, k)];
                for k in 0..sizes.len() {
                    let mut tightest = eval.upper(k)?;
                    for lo in 0..k {
                        tightest = tightest.min(p(lo) + eval.gap(lo, k)?);
                    }
                    let headroom = tightest - p(k);
                    out.min_slack = out.min_slack.min(headroom);
                    out.max_headroom = out.max_headroom.max(headroom);
                }
            }
        }
        Ok(out)
    }

    /// The mechanism pairing `alloc` with these maximal payments.
    pub fn mechanism(self: &Arc<Self>, alloc: Arc<dyn AllocationRule>) -> Result<Mechanism> {
        Mechanism::new(alloc, Arc::new(TablePayment::new(Arc::clone(self))))
    }
}

/// Payment rule reading charges from a [`PaymentTable`]. Reports off the
/// table's grid are rejected.
#[derive(Debug, Clone)]
pub struct TablePayment {
    table: Arc<PaymentTable>,
}

impl TablePayment {
    pub fn new(table: Arc<PaymentTable>) -> Self {
        Self { table }
    }
}

impl PaymentRule for TablePayment {
    fn label(&self) -> &str {
        "p-max"
    }

    fn agents(&self) -> usize {
        self.table.agents
    }

    fn charge(&self, reports: &[Report]) -> Result<Vec<f64>> {
        if reports.len() != self.table.agents {
            return Err(Error::DimensionMismatch {
                expected: self.table.agents,
                actual: reports.len(),
            });
        }
        (0..reports.len()).map(|i| self.table.payment(i, reports)).collect()
    }
}

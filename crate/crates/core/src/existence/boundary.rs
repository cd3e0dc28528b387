use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{AllocationRule, BestModelAllocation};
use crate::profile::{GridSpec, Lattice, Report};
use crate::quality::QualityFunction;
use crate::valuation::{PowerMarketModel, Valuation};

use super::{desirable_exists, BUDGET_TOL};

/// Outcome of a disparity-boundary scan over `D/ε = 1, 2, …, cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResult {
    pub alpha: f64,
    pub agents: usize,
    pub cap: usize,
    /// Largest feasible `D/ε`, or 0 when even `D/ε = 1` fails.
    pub boundary: usize,
    /// Feasible all the way to `cap`; the true boundary may lie above it.
    pub open_above: bool,
    /// `sequence[d - 1]` is the feasibility at `D/ε = d` for every scanned `d`.
    pub sequence: Vec<bool>,
}

impl BoundaryResult {
    fn from_sequence(alpha: f64, agents: usize, cap: usize, sequence: Vec<bool>) -> Self {
        let boundary = sequence.iter().rposition(|&ok| ok).map_or(0, |i| i + 1);
        Self {
            alpha,
            agents,
            cap,
            boundary,
            open_above: boundary == cap,
            sequence,
        }
    }

    /// Whether feasibility never returns after the first failure.
    pub fn is_monotone(&self) -> bool {
        self.sequence.windows(2).all(|w| w[0] || !w[1])
    }
}

fn check_inputs(alpha: f64, cap: usize, n: usize) -> Result<()> {
    if cap == 0 || n == 0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "boundary scan needs cap >= 1, n >= 1 and a finite growth rate, got cap={cap} n={n} alpha={alpha}"
        )));
    }
    Ok(())
}

/// Disparity boundary of the power market with growth rate `alpha`.
///
/// Uses unit step, identity quality and the best-model allocation, growing
/// the grid one point at a time. Payments on a grid are restrictions of
/// those on any larger grid, so the scan stops at the first infeasible
/// `D/ε`, which then closes the recorded sequence.
pub fn disparity_boundary(alpha: f64, cap: usize, n: usize) -> Result<BoundaryResult> {
    check_inputs(alpha, cap, n)?;
    let quality = QualityFunction::identity_unbounded();
    let mut solver = Incremental::new(
        Arc::new(PowerMarketModel::new(n, alpha)?),
        quality.clone(),
        Arc::new(BestModelAllocation::new(n, quality)),
    )?;
    let mut sequence = Vec::with_capacity(cap);
    for d in 1..=cap {
        let ok = solver.extend()?;
        debug_assert_eq!(solver.top, d);
        sequence.push(ok);
        if !ok {
            break;
        }
    }
    Ok(BoundaryResult::from_sequence(alpha, n, cap, sequence))
}

/// Like [`disparity_boundary`], but solves every `D/ε` up to `cap`
/// independently from scratch so the full sequence is measured.
pub fn disparity_boundary_full(alpha: f64, cap: usize, n: usize) -> Result<BoundaryResult> {
    check_inputs(alpha, cap, n)?;
    let quality = QualityFunction::identity_unbounded();
    let model = PowerMarketModel::new(n, alpha)?;
    let alloc = BestModelAllocation::new(n, quality.clone());
    let sequence = (1..=cap)
        .into_par_iter()
        .map(|d| {
            let grid = GridSpec::new(d as f64, 1.0, false)?;
            Ok(desirable_exists(&model, &quality, &alloc, &grid, BUDGET_TOL)?.is_feasible())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundaryResult::from_sequence(alpha, n, cap, sequence))
}

/// One slice of the incremental solver: the allocations and maximal
/// payments of `agent` at every report `0..=top` with the others fixed.
struct Slice {
    agent: usize,
    own: Vec<f64>,
    x_in: Vec<Vec<f64>>,
    x_out: Vec<f64>,
    p: Vec<f64>,
}

/// Existence solver on the integer grid `{0, 1, …, top}` that can grow
/// `top` by one, touching only new reports, new slices and new profiles.
struct Incremental {
    model: Arc<dyn Valuation>,
    quality: QualityFunction,
    alloc: Arc<dyn AllocationRule>,
    n: usize,
    top: usize,
    slices: Vec<Slice>,
    index: HashMap<(usize, Vec<usize>), usize>,
}

impl Incremental {
    fn new(model: Arc<dyn Valuation>, quality: QualityFunction, alloc: Arc<dyn AllocationRule>) -> Result<Self> {
        let n = model.agents();
        let mut solver = Self {
            model,
            quality,
            alloc,
            n,
            top: 0,
            slices: Vec::new(),
            index: HashMap::new(),
        };
        solver.add_slices(0)?;
        Ok(solver)
    }

    fn reports(&self, agent: usize, own: Report, others: &[usize]) -> Vec<Report> {
        let mut r = Vec::with_capacity(self.n);
        for (j, &d) in others.iter().enumerate() {
            if j == agent {
                r.push(own);
            }
            r.push(if d == 0 { Report::Absent } else { Report::Size((d - 1) as f64) });
        }
        if agent == others.len() {
            r.push(own);
        }
        r
    }

    fn value(&self, slice: &Slice, x: &[f64], truth: usize, scratch: &mut Vec<f64>) -> Result<f64> {
        scratch.clear();
        scratch.extend(x.iter().zip(&slice.own).map(|(x, o)| x.max(*o)));
        scratch[slice.agent] = x[slice.agent].max(self.quality.evaluate(truth as f64)?);
        self.model.value_of(slice.agent, scratch)
    }

    /// Appends report `k` to a slice whose payments cover `0..k`.
    fn push_report(&self, slice: &mut Slice, others: &[usize], k: usize, scratch: &mut Vec<f64>) -> Result<()> {
        let x = self.alloc.allocate(&self.reports(slice.agent, Report::Size(k as f64), others))?;
        let truthful = self.value(slice, &x, k, scratch)?;
        let mut best = truthful - self.value(slice, &slice.x_out, k, scratch)?;
        for lo in 0..k {
            let gap = truthful - self.value(slice, &slice.x_in[lo], k, scratch)?;
            best = best.min(slice.p[lo] + gap);
        }
        slice.x_in.push(x);
        slice.p.push(best);
        Ok(())
    }

    fn build_slice(&self, agent: usize, others: &[usize]) -> Result<Slice> {
        let exit = self.reports(agent, Report::Absent, others);
        let own = exit
            .iter()
            .map(|r| self.quality.evaluate(r.contribution()))
            .collect::<Result<Vec<_>>>()?;
        let mut slice = Slice {
            agent,
            own,
            x_in: Vec::with_capacity(self.top + 1),
            x_out: self.alloc.allocate(&exit)?,
            p: Vec::with_capacity(self.top + 1),
        };
        let mut scratch = Vec::with_capacity(self.n);
        for k in 0..=self.top {
            self.push_report(&mut slice, others, k, &mut scratch)?;
        }
        Ok(slice)
    }

    /// Adds every slice whose others' digits reach `top + 1` (the newest
    /// type), or all slices when `top` is 0.
    fn add_slices(&mut self, top: usize) -> Result<()> {
        let lattice = Lattice {
            radix: top + 2,
            len: self.n - 1,
        };
        let mut keys = Vec::new();
        let mut digits = vec![0; self.n - 1];
        for code in 0..lattice.count() {
            lattice.decode(code, &mut digits);
            if top == 0 || digits.iter().any(|&d| d == top + 1) {
                for agent in 0..self.n {
                    keys.push((agent, digits.clone()));
                }
            }
        }
        let built = keys
            .par_iter()
            .map(|(agent, others)| self.build_slice(*agent, others))
            .collect::<Result<Vec<_>>>()?;
        for (key, slice) in keys.into_iter().zip(built) {
            self.index.insert(key, self.slices.len());
            self.slices.push(slice);
        }
        Ok(())
    }

    /// Grows the grid to `top + 1` and reports whether every truthful
    /// profile is still weakly budget balanced.
    fn extend(&mut self) -> Result<bool> {
        let k = self.top + 1;
        let keys: Vec<(usize, Vec<usize>)> = {
            let mut keys = vec![(0, Vec::new()); self.slices.len()];
            for (key, &pos) in &self.index {
                keys[pos] = key.clone();
            }
            keys
        };
        let mut slices = std::mem::take(&mut self.slices);
        let grown = slices
            .par_iter_mut()
            .zip(keys.par_iter())
            .map_init(
                || Vec::with_capacity(self.n),
                |scratch, (slice, (_, others))| self.push_report(slice, others, k, scratch),
            )
            .collect::<Result<Vec<()>>>();
        self.slices = slices;
        grown?;
        self.top = k;
        self.add_slices(k)?;
        Ok(self.budget_ok(k))
    }

    /// Budget check over truthful profiles in `{0..=top}^n` that use `top`.
    fn budget_ok(&self, top: usize) -> bool {
        let lattice = Lattice {
            radix: top + 1,
            len: self.n,
        };
        (0..lattice.count()).into_par_iter().all(|code| {
            let mut digits = vec![0; self.n];
            lattice.decode(code, &mut digits);
            if !digits.contains(&top) {
                return true;
            }
            let revenue: f64 = (0..self.n)
                .map(|i| {
                    let others: Vec<usize> = digits
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, &d)| d + 1)
                        .collect();
                    self.slices[self.index[&(i, others)]].p[digits[i]]
                })
                .sum();
            revenue >= -BUDGET_TOL
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incremental_matches_direct_solver() {
        for alpha in [-1.0, -0.8, -0.3] {
            let fast = disparity_boundary(alpha, 12, 2).unwrap();
            let full = disparity_boundary_full(alpha, 12, 2).unwrap();
            assert_eq!(fast.boundary, full.boundary, "alpha {alpha}");
            assert_eq!(fast.open_above, full.open_above);
            assert_eq!(full.sequence[..fast.sequence.len()], fast.sequence[..]);
            assert!(full.is_monotone());
        }
    }

    #[test]
    fn non_competitive_is_open_above() {
        let r = disparity_boundary(0.0, 15, 2).unwrap();
        assert_eq!(r.boundary, 15);
        assert!(r.open_above);
        assert!(r.sequence.iter().all(|&ok| ok));
    }

    #[test]
    fn three_agents_agree() {
        let fast = disparity_boundary(-1.0, 5, 3).unwrap();
        let full = disparity_boundary_full(-1.0, 5, 3).unwrap();
        assert_eq!(fast.boundary, full.boundary);
    }

    #[test]
    fn rejects_zero_cap() {
        assert!(disparity_boundary(-0.5, 0, 2).is_err());
    }
}

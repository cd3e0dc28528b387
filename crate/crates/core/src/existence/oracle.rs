use crate::error::{Error, Result};
use crate::mechanism::AllocationRule;
use crate::profile::{GridSpec, Report};
use crate::quality::QualityFunction;
use crate::valuation::Valuation;

pub const ORACLE_MAX_AGENTS: usize = 2;
pub const ORACLE_MAX_INTERVALS: usize = 5;

/// Value of `agent` whose true type is `truth[agent]` when the mechanism
/// sees `reports`. Others' true types equal their reports, absent as zero.
fn value(
    model: &dyn Valuation,
    quality: &QualityFunction,
    alloc: &dyn AllocationRule,
    agent: usize,
    own_truth: f64,
    reports: &[Report],
) -> Result<f64> {
    let x = alloc.allocate(reports)?;
    let mut q = Vec::with_capacity(reports.len());
    for (j, r) in reports.iter().enumerate() {
        let t = if j == agent { own_truth } else { r.size().unwrap_or(0.0) };
        q.push(x[j].max(quality.evaluate(t)?));
    }
    model.value_of(agent, &q)
}

/// Decides existence of a desirable mechanism by all-pairs relaxation.
///
/// Every payment variable of every agent and slice goes into one
/// difference-constraint system with a shared zero vertex; Floyd–Warshall
/// yields the maximal solution, which is then checked for weak budget
/// balance at every truthful profile. Only tiny instances are accepted.
pub fn brute_force_oracle(
    model: &dyn Valuation,
    quality: &QualityFunction,
    alloc: &dyn AllocationRule,
    grid: &GridSpec,
    tol: f64,
) -> Result<bool> {
    let n = model.agents();
    if n > ORACLE_MAX_AGENTS || grid.intervals() > ORACLE_MAX_INTERVALS {
        return Err(Error::InstanceTooLarge(format!(
            "oracle accepts n <= {ORACLE_MAX_AGENTS} and D/eps <= {ORACLE_MAX_INTERVALS}, got n={n} D/eps={}",
            grid.intervals()
        )));
    }
    if alloc.agents() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: alloc.agents(),
        });
    }
    let sizes = grid.sizes();
    let others_choices: Vec<Report> = std::iter::once(Report::Absent)
        .chain(sizes.iter().map(|&s| Report::Size(s)))
        .collect();

    // Variable 0 is the zero vertex; the rest are (agent, other report, own report).
    let slice_count = if n == 1 { 1 } else { others_choices.len() };
    let var = |agent: usize, slice: usize, k: usize| 1 + (agent * slice_count + slice) * sizes.len() + k;
    let v = 1 + n * slice_count * sizes.len();
    let mut dist = vec![vec![f64::INFINITY; v]; v];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = 0.0;
    }

    #[allow(clippy::needless_range_loop)]
    for agent in 0..n {
        for slice in 0..slice_count {
            let profile = |own: Report| -> Vec<Report> {
                let mut r = vec![own; n];
                if n == 2 {
                    r[1 - agent] = others_choices[slice];
                }
                r
            };
            for (k, &t) in sizes.iter().enumerate() {
                let truthful = value(model, quality, alloc, agent, t, &profile(Report::Size(t)))?;
                let exit = value(model, quality, alloc, agent, t, &profile(Report::Absent))?;
                let to = var(agent, slice, k);
                dist[0][to] = dist[0][to].min(truthful - exit);
                for (lo, &s) in sizes.iter().enumerate().take(k) {
                    let under = value(model, quality, alloc, agent, t, &profile(Report::Size(s)))?;
                    let from = var(agent, slice, lo);
                    dist[from][to] = dist[from][to].min(truthful - under);
                }
            }
        }
    }

    for mid in 0..v {
        let through = dist[mid].clone();
        for row in dist.iter_mut() {
            let via = row[mid];
            if !via.is_finite() {
                continue;
            }
            for (d, &w) in row.iter_mut().zip(&through) {
                *d = d.min(via + w);
            }
        }
    }
    if (0..v).any(|a| dist[a][a] < 0.0) {
        return Ok(false);
    }

    let p = |agent: usize, slice: usize, k: usize| dist[0][var(agent, slice, k)];
    let m = sizes.len();
    let profiles = m.pow(n as u32);
    for code in 0..profiles {
        let ks: Vec<usize> = if n == 1 { vec![code] } else { vec![code / m, code % m] };
        let revenue: f64 = if n == 1 {
            p(0, 0, ks[0])
        } else {
            p(0, ks[1] + 1, ks[0]) + p(1, ks[0] + 1, ks[1])
        };
        if revenue < -tol {
            return Ok(false);
        }
    }
    Ok(true)
}

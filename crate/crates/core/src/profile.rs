//! Type profiles, report profiles with non-participation, and type grids.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// One agent's report: a data size, or non-participation.
///
/// `Size(0.0)` is a participant contributing nothing, which allocation rules
/// may still serve; `Absent` receives nothing and pays nothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Report {
    Absent,
    Size(f64),
}

impl Report {
    pub fn size(self) -> Option<f64> {
        match self {
            Report::Absent => None,
            Report::Size(s) => Some(s),
        }
    }

    pub fn is_absent(self) -> bool {
        matches!(self, Report::Absent)
    }

    /// Contributed data size, counting an absent agent as zero.
    pub fn contribution(self) -> f64 {
        self.size().unwrap_or(0.0)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Report::Absent => f.write_str("none"),
            Report::Size(s) => write!(f, "{s}"),
        }
    }
}

// `null` on the wire for non-participation.
impl Serialize for Report {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.size().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Report {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match Option::<f64>::deserialize(d)? {
            Some(s) => Report::Size(s),
            None => Report::Absent,
        })
    }
}

/// True valid data sizes, one per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TypeProfile(Vec<f64>);

impl TypeProfile {
    pub fn new(types: Vec<f64>) -> Result<Self> {
        if let Some(bad) = types.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("type {bad} is not a nonnegative size")));
        }
        Ok(Self(types))
    }

    pub fn agents(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Every agent reporting its true type.
    pub fn truthful(&self) -> ReportProfile {
        ReportProfile(self.0.iter().map(|&t| Report::Size(t)).collect())
    }
}

impl TryFrom<Vec<f64>> for TypeProfile {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TypeProfile> for Vec<f64> {
    fn from(p: TypeProfile) -> Self {
        p.0
    }
}

impl std::ops::Deref for TypeProfile {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Reported types; entries may be [`Report::Absent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReportProfile(Vec<Report>);

impl ReportProfile {
    pub fn new(reports: Vec<Report>) -> Result<Self> {
        for r in &reports {
            if let Report::Size(s) = r {
                if !(*s >= 0.0) || !s.is_finite() {
                    return Err(Error::InvalidArgument(format!("report {s} is not a nonnegative size")));
                }
            }
        }
        Ok(Self(reports))
    }

    pub fn from_sizes(sizes: &[f64]) -> Result<Self> {
        Self::new(sizes.iter().map(|&s| Report::Size(s)).collect())
    }

    pub fn agents(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Report] {
        &self.0
    }

    /// Checks that no numeric report exceeds the agent's true type.
    pub fn check_against(&self, truth: &TypeProfile) -> Result<()> {
        check_reports(&self.0, truth)
    }

    pub fn with(&self, agent: usize, report: Report) -> Self {
        let mut r = self.0.clone();
        r[agent] = report;
        Self(r)
    }
}

impl std::ops::Deref for ReportProfile {
    type Target = [Report];
    fn deref(&self) -> &[Report] {
        &self.0
    }
}

pub(crate) fn check_reports(reports: &[Report], truth: &[f64]) -> Result<()> {
    if reports.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: reports.len(),
        });
    }
    for (agent, (r, &t)) in reports.iter().zip(truth).enumerate() {
        if let Report::Size(s) = *r {
            if s > t {
                return Err(Error::OverReport {
                    agent,
                    report: s,
                    truth: t,
                });
            }
        }
    }
    Ok(())
}

/// An evenly spaced type grid `{0, ε, 2ε, …, D}`, optionally preceded by the
/// non-participation report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct GridSpec {
    upper: f64,
    intervals: usize,
    include_empty: bool,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    upper_bound: f64,
    step: f64,
    include_empty: bool,
}

impl TryFrom<GridRepr> for GridSpec {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        GridSpec::new(r.upper_bound, r.step, r.include_empty)
    }
}

impl From<GridSpec> for GridRepr {
    fn from(g: GridSpec) -> Self {
        GridRepr {
            upper_bound: g.upper,
            step: g.step(),
            include_empty: g.include_empty,
        }
    }
}

impl GridSpec {
    /// Builds a grid from an upper bound `D` and step `ε`; `D/ε` must be a
    /// positive integer.
    pub fn new(upper: f64, step: f64, include_empty: bool) -> Result<Self> {
        if !(upper > 0.0 && upper.is_finite()) || !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidGrid(format!("D={upper} and eps={step} must be positive")));
        }
        let ratio = upper / step;
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidGrid(format!("D/eps = {ratio} is not a positive integer")));
        }
        Ok(Self {
            upper,
            intervals: k as usize,
            include_empty,
        })
    }

    /// Grid on `[0, upper]` split into `intervals` equal steps.
    pub fn with_intervals(upper: f64, intervals: usize, include_empty: bool) -> Result<Self> {
        if !(upper > 0.0 && upper.is_finite()) || intervals == 0 {
            return Err(Error::InvalidGrid(format!(
                "D={upper} with {intervals} intervals is not a valid grid"
            )));
        }
        Ok(Self {
            upper,
            intervals,
            include_empty,
        })
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    pub fn step(&self) -> f64 {
        self.upper / self.intervals as f64
    }

    /// `D/ε`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn include_empty(&self) -> bool {
        self.include_empty
    }

    pub fn without_empty(mut self) -> Self {
        self.include_empty = false;
        self
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_intervals(self.upper * factor, self.intervals, self.include_empty)
    }

    /// The `k`-th grid size, `k·D/(D/ε)`; exact at both ends.
    pub fn size_at(&self, k: usize) -> f64 {
        if k == self.intervals {
            self.upper
        } else {
            self.upper * k as f64 / self.intervals as f64
        }
    }

    /// Grid sizes `[0, ε, …, D]`.
    pub fn sizes(&self) -> Vec<f64> {
        (0..=self.intervals).map(|k| self.size_at(k)).collect()
    }

    /// Grid reports, with [`Report::Absent`] first when `include_empty` is set.
    pub fn points(&self) -> Vec<Report> {
        let mut out = Vec::with_capacity(self.intervals + 2);
        if self.include_empty {
            out.push(Report::Absent);
        }
        out.extend(self.sizes().into_iter().map(Report::Size));
        out
    }

    /// Index of the grid size nearest to `size`, if `size` lies on the grid.
    pub fn index_of(&self, size: f64) -> Option<usize> {
        let k = (size / self.step()).round();
        if k < 0.0 || k > self.intervals as f64 {
            return None;
        }
        let k = k as usize;
        let tol = 1e-9 * self.step().max(1.0);
        ((self.size_at(k) - size).abs() <= tol).then_some(k)
    }
}

/// Free function form of [`GridSpec::points`].
pub fn grid_points(grid: &GridSpec) -> Vec<Report> {
    grid.points()
}

/// Mixed-radix enumeration of `radix^len` index tuples in lexicographic
/// order (last coordinate fastest).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Lattice {
    pub radix: usize,
    pub len: usize,
}

impl Lattice {
    pub fn count(&self) -> usize {
        self.radix.pow(self.len as u32)
    }

    pub fn decode(&self, mut code: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = code % self.radix;
            code /= self.radix;
        }
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &d| acc * self.radix + d)
    }
}

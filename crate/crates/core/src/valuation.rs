//! Valuation families with type-imposed externalities.
//!
//! Every family maps the vector of deployed qualities `q` to per-agent
//! values. Type-imposed externalities enter through `q`, since each agent
//! deploys the better of its allocation and its own-data model.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{GridSpec, Lattice};

/// How a valuation supplies partial derivatives `∂v_i/∂q_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeSupport {
    Analytic,
    FiniteDifference,
    None,
}

pub trait Valuation: Send + Sync {
    fn label(&self) -> &str;

    fn agents(&self) -> usize;

    /// Values of all agents at deployed qualities `q`.
    fn values(&self, q: &[f64]) -> Result<Vec<f64>> {
        check_qualities(self.agents(), q)?;
        (0..q.len()).map(|i| self.value_of(i, q)).collect()
    }

    /// Value of agent `i` alone. Implementations may skip input validation.
    fn value_of(&self, i: usize, q: &[f64]) -> Result<f64>;

    /// Analytic `∂v_i/∂q_j` at `q`, when the family has one there.
    fn partial(&self, _q: &[f64], _i: usize, _j: usize) -> Option<f64> {
        None
    }

    fn derivative_support(&self) -> DerivativeSupport {
        DerivativeSupport::FiniteDifference
    }
}

pub(crate) fn check_qualities(n: usize, q: &[f64]) -> Result<()> {
    if q.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: q.len(),
        });
    }
    if let Some(bad) = q.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("quality {bad} is not a nonnegative number")));
    }
    Ok(())
}

/// `v_i = Σ_j α_ij q_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearExternalityModel {
    n: usize,
    alpha: Vec<f64>,
}

impl LinearExternalityModel {
    /// Builds from a square coefficient matrix given row by row. With
    /// `strict`, every own-quality coefficient `α_ii` must be positive.
    pub fn new(alpha: Vec<Vec<f64>>, strict: bool) -> Result<Self> {
        let n = alpha.len();
        if n == 0 {
            return Err(Error::InvalidArgument("externality matrix is empty".into()));
        }
        if let Some(row) = alpha.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: row.len(),
            });
        }
        if alpha.iter().flatten().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("externality coefficients must be finite".into()));
        }
        if strict {
            if let Some(i) = (0..n).find(|&i| !(alpha[i][i] > 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "own coefficient alpha[{i}][{i}] = {} is not positive",
                    alpha[i][i]
                )));
            }
        }
        Ok(Self {
            n,
            alpha: alpha.into_iter().flatten().collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let alpha = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(alpha, true).expect("identity is valid")
    }

    /// Influence of agent `j`'s quality on agent `i`'s value.
    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        self.alpha[i * self.n + j]
    }

    /// `Σ_j α_ji`: the marginal welfare of agent `i`'s quality.
    pub fn column_sum(&self, i: usize) -> f64 {
        (0..self.n).map(|j| self.coefficient(j, i)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.alpha.chunks(self.n).map(<[f64]>::to_vec).collect()
    }
}

impl Valuation for LinearExternalityModel {
    fn label(&self) -> &str {
        "linear"
    }

    fn agents(&self) -> usize {
        self.n
    }

    fn value_of(&self, i: usize, q: &[f64]) -> Result<f64> {
        let row = &self.alpha[i * self.n..(i + 1) * self.n];
        Ok(row.iter().zip(q).map(|(a, q)| a * q).sum())
    }

    fn partial(&self, _q: &[f64], i: usize, j: usize) -> Option<f64> {
        Some(self.coefficient(i, j))
    }

    fn derivative_support(&self) -> DerivativeSupport {
        DerivativeSupport::Analytic
    }
}

type OwnFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type OthersFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Polynomial {
    linear: Vec<f64>,
    quadratic: Vec<f64>,
    cross: Vec<f64>,
}

/// `v_i = F_i(q_i) + θ_i(q_{-i})` with each `F_i` strictly increasing.
#[derive(Clone)]
pub struct QuasiMonotoneModel {
    own: Vec<OwnFn>,
    others: Vec<OthersFn>,
    poly: Option<Polynomial>,
}

impl QuasiMonotoneModel {
    /// Registers arbitrary `F_i` and `θ_i`. `θ_i` receives the other agents'
    /// qualities in index order with `i` removed. Each `F_i` is spot-checked
    /// for strict monotonicity on 1000 random ordered pairs in `[0, 1]`.
    pub fn new(own: Vec<OwnFn>, others: Vec<OthersFn>) -> Result<Self> {
        if own.is_empty() || own.len() != others.len() {
            return Err(Error::InvalidArgument(
                "need one F_i and one theta_i per agent".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x51_4d_4f_4e);
        for (i, f) in own.iter().enumerate() {
            for _ in 0..1000 {
                let a: f64 = rng.gen_range(0.0..1.0);
                let b: f64 = rng.gen_range(0.0..1.0);
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                if hi - lo > 1e-12 && !(f(hi) > f(lo)) {
                    return Err(Error::InvalidArgument(format!(
                        "F_{i} is not strictly increasing between {lo} and {hi}"
                    )));
                }
            }
        }
        Ok(Self {
            own,
            others,
            poly: None,
        })
    }

    /// Smooth polynomial instance:
    /// `F_i(q) = a_i q + b_i q²` and `θ_i(q_{-i}) = Σ_{j≠i} c_ij q_j`,
    /// with `a_i > 0`, `b_i ≥ 0`. `cross` is an n×n matrix whose diagonal is
    /// ignored.
    pub fn polynomial(linear: Vec<f64>, quadratic: Vec<f64>, cross: Vec<Vec<f64>>) -> Result<Self> {
        let n = linear.len();
        if n == 0 || quadratic.len() != n || cross.len() != n || cross.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("polynomial coefficients must agree on n".into()));
        }
        if linear.iter().any(|a| !(*a > 0.0)) || quadratic.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::InvalidArgument(
                "own terms need a_i > 0 and b_i >= 0 to be increasing".into(),
            ));
        }
        let poly = Polynomial {
            linear,
            quadratic,
            cross: cross.into_iter().flatten().collect(),
        };
        let own: Vec<OwnFn> = (0..n)
            .map(|i| {
                let (a, b) = (poly.linear[i], poly.quadratic[i]);
                Arc::new(move |q: f64| a * q + b * q * q) as OwnFn
            })
            .collect();
        let others: Vec<OthersFn> = (0..n)
            .map(|i| {
                let c: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| poly.cross[i * n + j])
                    .collect();
                Arc::new(move |rest: &[f64]| c.iter().zip(rest).map(|(c, q)| c * q).sum()) as OthersFn
            })
            .collect();
        let mut model = Self::new(own, others)?;
        model.poly = Some(poly);
        Ok(model)
    }
}

impl fmt::Debug for QuasiMonotoneModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuasiMonotoneModel")
            .field("agents", &self.own.len())
            .field("poly", &self.poly)
            .finish()
    }
}

impl Valuation for QuasiMonotoneModel {
    fn label(&self) -> &str {
        "quasi-monotone"
    }

    fn agents(&self) -> usize {
        self.own.len()
    }

    fn value_of(&self, i: usize, q: &[f64]) -> Result<f64> {
        let rest: Vec<f64> = q
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .collect();
        Ok((self.own[i])(q[i]) + (self.others[i])(&rest))
    }

    fn partial(&self, q: &[f64], i: usize, j: usize) -> Option<f64> {
        let p = self.poly.as_ref()?;
        let n = self.own.len();
        Some(if i == j {
            p.linear[i] + 2.0 * p.quadratic[i] * q[i]
        } else {
            p.cross[i * n + j]
        })
    }

    fn derivative_support(&self) -> DerivativeSupport {
        if self.poly.is_some() {
            DerivativeSupport::Analytic
        } else {
            DerivativeSupport::FiniteDifference
        }
    }
}

/// Power-law market `v_i = (Σ_j q_j)^α · q_i` with identity quality.
///
/// Total market size is `(Σ q)^{α+1}`, so `α ≥ -1` gives a growing market
/// and `α ≥ 0` a non-competitive one. At the zero-quality point with `α < 0`
/// every value is defined as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerMarketModel {
    n: usize,
    growth: f64,
}

impl PowerMarketModel {
    pub fn new(n: usize, growth: f64) -> Result<Self> {
        if n == 0 || !growth.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "power market needs n >= 1 and a finite growth rate, got n={n} alpha={growth}"
            )));
        }
        Ok(Self { n, growth })
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }
}

impl Valuation for PowerMarketModel {
    fn label(&self) -> &str {
        "power-market"
    }

    fn agents(&self) -> usize {
        self.n
    }

    fn value_of(&self, i: usize, q: &[f64]) -> Result<f64> {
        let total: f64 = q.iter().sum();
        if total <= 0.0 {
            return Ok(0.0);
        }
        Ok(total.powf(self.growth) * q[i])
    }

    fn partial(&self, q: &[f64], i: usize, j: usize) -> Option<f64> {
        let total: f64 = q.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let cross = self.growth * total.powf(self.growth - 1.0) * q[i];
        Some(if i == j { cross + total.powf(self.growth) } else { cross })
    }

    fn derivative_support(&self) -> DerivativeSupport {
        DerivativeSupport::Analytic
    }
}

/// Fixed unit market split in proportion to quality, `v_i = q_i / Σ_j q_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionalFixedMarketModel {
    n: usize,
}

impl ProportionalFixedMarketModel {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("market needs at least one agent".into()));
        }
        Ok(Self { n })
    }
}

impl Valuation for ProportionalFixedMarketModel {
    fn label(&self) -> &str {
        "proportional"
    }

    fn agents(&self) -> usize {
        self.n
    }

    fn value_of(&self, i: usize, q: &[f64]) -> Result<f64> {
        let total: f64 = q.iter().sum();
        if total <= 0.0 {
            return Ok(0.0);
        }
        Ok(q[i] / total)
    }

    fn partial(&self, q: &[f64], i: usize, j: usize) -> Option<f64> {
        let total: f64 = q.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let own = if i == j { 1.0 / total } else { 0.0 };
        Some(own - q[i] / (total * total))
    }

    fn derivative_support(&self) -> DerivativeSupport {
        DerivativeSupport::Analytic
    }
}

/// `M(q) = Σ_i v_i(q)`.
pub fn market_size(model: &dyn Valuation, q: &[f64]) -> Result<f64> {
    Ok(model.values(q)?.iter().sum())
}

/// Default finite-difference step for the competition probe.
pub const PROBE_STEP: f64 = 1e-4;

/// Outcome of [`is_non_competitive`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitionProbe {
    pub non_competitive: bool,
    /// `(i, j, q, estimate)` for the first negative `∂v_i/∂q_j` found.
    pub witness: Option<(usize, usize, Vec<f64>, f64)>,
}

/// Finite-difference estimate of `∂v_i/∂q_j`, one-sided where the step would
/// leave `[0, upper]`.
pub fn fd_partial(model: &dyn Valuation, q: &[f64], i: usize, j: usize, h: f64, upper: f64) -> Result<f64> {
    let mut probe = q.to_vec();
    let at = |probe: &mut Vec<f64>, x: f64| -> Result<f64> {
        probe[j] = x;
        model.value_of(i, probe)
    };
    let x = q[j];
    let (lo, hi) = (x - h >= 0.0, x + h <= upper);
    Ok(match (lo, hi) {
        (true, true) => (at(&mut probe, x + h)? - at(&mut probe, x - h)?) / (2.0 * h),
        (false, true) => (at(&mut probe, x + h)? - at(&mut probe, x)?) / h,
        (true, false) => (at(&mut probe, x)? - at(&mut probe, x - h)?) / h,
        (false, false) => 0.0,
    })
}

/// Probes `∂v_i/∂q_j ≥ 0` at every point of `grid^n` by finite differences.
pub fn is_non_competitive(model: &dyn Valuation, grid: &GridSpec, tol: f64) -> Result<CompetitionProbe> {
    is_non_competitive_with_step(model, grid, tol, PROBE_STEP)
}

pub fn is_non_competitive_with_step(
    model: &dyn Valuation,
    grid: &GridSpec,
    tol: f64,
    h: f64,
) -> Result<CompetitionProbe> {
    let n = model.agents();
    let sizes = grid.sizes();
    let lattice = Lattice {
        radix: sizes.len(),
        len: n,
    };
    let mut digits = vec![0; n];
    let mut q = vec![0.0; n];
    for code in 0..lattice.count() {
        lattice.decode(code, &mut digits);
        for (slot, &d) in q.iter_mut().zip(&digits) {
            *slot = sizes[d];
        }
        for i in 0..n {
            for j in 0..n {
                let d = fd_partial(model, &q, i, j, h, grid.upper_bound())?;
                if d < -tol {
                    return Ok(CompetitionProbe {
                        non_competitive: false,
                        witness: Some((i, j, q.clone(), d)),
                    });
                }
            }
        }
    }
    Ok(CompetitionProbe {
        non_competitive: true,
        witness: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::new(1.0, 0.25, false).unwrap()
    }

    #[test]
    fn value_examples() {
        let lin = LinearExternalityModel::identity(2);
        assert_eq!(lin.values(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);

        let prop = ProportionalFixedMarketModel::new(2).unwrap();
        assert_eq!(prop.values(&[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        // equal qualities split the market at any scale
        assert_eq!(prop.values(&[11.0, 11.0]).unwrap(), vec![0.5, 0.5]);

        let pm = PowerMarketModel::new(2, -1.0).unwrap();
        let v = pm.values(&[0.2, 0.3]).unwrap();
        assert!((v[0] - 0.4).abs() < 1e-15 && (v[1] - 0.6).abs() < 1e-15);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn market_size_examples() {
        let pm0 = PowerMarketModel::new(2, 0.0).unwrap();
        assert!((market_size(&pm0, &[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        let pm1 = PowerMarketModel::new(3, -1.0).unwrap();
        assert!((market_size(&pm1, &[0.1, 0.7, 0.3]).unwrap() - 1.0).abs() < 1e-15);
        let lin = LinearExternalityModel::identity(2);
        assert!((market_size(&lin, &[0.2, 0.7]).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn degenerate_market_point_is_zero() {
        for alpha in [-1.0, -0.5, 0.0] {
            let pm = PowerMarketModel::new(2, alpha).unwrap();
            assert_eq!(pm.values(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        }
        let prop = ProportionalFixedMarketModel::new(3).unwrap();
        assert_eq!(prop.values(&[0.0; 3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn competition_probe_examples() {
        let pm0 = PowerMarketModel::new(2, 0.0).unwrap();
        assert!(is_non_competitive(&pm0, &grid(), 1e-9).unwrap().non_competitive);

        let pm1 = PowerMarketModel::new(2, -1.0).unwrap();
        let probe = is_non_competitive(&pm1, &grid(), 1e-9).unwrap();
        assert!(!probe.non_competitive);
        let (i, j, q, d) = probe.witness.unwrap();
        assert_ne!(i, j);
        let exact = pm1.partial(&q, i, j).unwrap();
        assert!(exact < 0.0);
        assert!((d - exact).abs() < 1e-2 * exact.abs());

        let lin = LinearExternalityModel::new(vec![vec![1.0, -0.5], vec![0.0, 1.0]], true).unwrap();
        let probe = is_non_competitive(&lin, &grid(), 1e-9).unwrap();
        let (i, j, _, d) = probe.witness.unwrap();
        assert_eq!((i, j), (0, 1));
        assert!((d + 0.5).abs() < 1e-9);
    }

    #[test]
    fn analytic_partials_match_finite_differences() {
        let models: Vec<Box<dyn Valuation>> = vec![
            Box::new(PowerMarketModel::new(3, -0.7).unwrap()),
            Box::new(ProportionalFixedMarketModel::new(3).unwrap()),
            Box::new(LinearExternalityModel::new(
                vec![vec![0.5, -0.2, 0.1], vec![0.3, 0.9, -0.7], vec![0.0, 0.4, 0.2]],
                true,
            )
            .unwrap()),
            Box::new(
                QuasiMonotoneModel::polynomial(
                    vec![1.0, 0.5, 2.0],
                    vec![0.3, 0.0, 1.0],
                    vec![vec![0.0, -0.4, 0.2], vec![0.1, 0.0, -0.9], vec![0.5, 0.5, 0.0]],
                )
                .unwrap(),
            ),
        ];
        let q = [0.3, 0.55, 0.8];
        for m in &models {
            for i in 0..3 {
                for j in 0..3 {
                    let a = m.partial(&q, i, j).unwrap();
                    let fd = fd_partial(m.as_ref(), &q, i, j, 1e-5, 1.0).unwrap();
                    assert!((a - fd).abs() < 1e-7, "{} d{i}/d{j}: {a} vs {fd}", m.label());
                }
            }
        }
    }

    #[test]
    fn strict_linear_rejects_nonpositive_diagonal() {
        assert!(LinearExternalityModel::new(vec![vec![-0.1, 0.0], vec![0.0, 1.0]], true).is_err());
        assert!(LinearExternalityModel::new(vec![vec![-0.1, 0.0], vec![0.0, 1.0]], false).is_ok());
        assert!(LinearExternalityModel::new(vec![vec![1.0], vec![0.0, 1.0]], false).is_err());
    }

    #[test]
    fn quasi_monotone_rejects_decreasing_own_term() {
        let own: Vec<OwnFn> = vec![Arc::new(|q| -q)];
        let others: Vec<OthersFn> = vec![Arc::new(|_| 0.0)];
        assert!(QuasiMonotoneModel::new(own, others).is_err());
    }

    #[test]
    fn dimension_checked() {
        let pm = PowerMarketModel::new(2, -0.5).unwrap();
        assert!(matches!(pm.values(&[0.1]), Err(Error::DimensionMismatch { .. })));
    }

    proptest! {
        #[test]
        fn power_market_is_homogeneous(
            alpha in -1.0f64..0.5,
            q in prop::collection::vec(0.0f64..1.0, 2..5),
            s in 0.05f64..20.0,
        ) {
            let total: f64 = q.iter().sum();
            prop_assume!(total > 1e-6);
            let pm = PowerMarketModel::new(q.len(), alpha).unwrap();
            let base = pm.values(&q).unwrap();
            let scaled: Vec<f64> = q.iter().map(|v| v * s).collect();
            let out = pm.values(&scaled).unwrap();
            let factor = s.powf(alpha + 1.0);
            for (a, b) in out.iter().zip(&base) {
                prop_assert!((a - factor * b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn proportional_values_sum_to_one(q in prop::collection::vec(0.0f64..5.0, 1..6)) {
            prop_assume!(q.iter().sum::<f64>() > 1e-9);
            let m = ProportionalFixedMarketModel::new(q.len()).unwrap();
            let total: f64 = m.values(&q).unwrap().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn growing_power_market(
            alpha in -1.0f64..0.0,
            pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..5),
        ) {
            // q dominates q' coordinatewise
            let lo: Vec<f64> = pairs.iter().map(|(a, b)| a.min(*b)).collect();
            let hi: Vec<f64> = pairs.iter().map(|(a, b)| a.max(*b)).collect();
            let pm = PowerMarketModel::new(lo.len(), alpha).unwrap();
            prop_assert!(market_size(&pm, &hi).unwrap() >= market_size(&pm, &lo).unwrap() - 1e-12);
        }
    }
}

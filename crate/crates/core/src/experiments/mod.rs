//! Seeded experiment drivers producing plot-ready rows.
//!
//! Randomness comes from ChaCha8 (`rand_chacha` 0.3). Every sample draws
//! from its own substream: the generator is seeded with the 64-bit
//! experiment seed and its stream id set to `point << 32 | sample`, where
//! `point` is the index of the sweep point. Results therefore do not depend
//! on thread count or scheduling, and means are summed in sample order.

mod sweeps;
mod vcg;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use sweeps::{
    boundary_sweep, mep_scaling_experiment, mep_type_sweep, BoundaryRow, BoundarySweepConfig, ScalingConfig,
    ScalingRow, TypeSweepConfig, TypeSweepRow,
};
pub use vcg::{vcg_counterexample_report, VcgReport};

use crate::error::Result;
use crate::valuation::LinearExternalityModel;

/// Generator for sample `sample` at sweep point `point`.
pub fn substream(seed: u64, point: u64, sample: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(point << 32 | (sample & 0xffff_ffff));
    rng
}

/// Draws `α_ij ~ U[−1, 1)` row by row. With `positive_diagonal`, each own
/// coefficient is redrawn until positive, i.e. drawn from `U(0, 1)`.
pub fn draw_linear_model<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    positive_diagonal: bool,
) -> Result<LinearExternalityModel> {
    let mut alpha = vec![vec![0.0; n]; n];
    for (i, row) in alpha.iter_mut().enumerate() {
        for (j, a) in row.iter_mut().enumerate() {
            *a = rng.gen_range(-1.0..1.0);
            while positive_diagonal && i == j && *a <= 0.0 {
                *a = rng.gen_range(-1.0..1.0);
            }
        }
    }
    LinearExternalityModel::new(alpha, positive_diagonal)
}

/// Ordinary least-squares slope of `ys` against `xs`; zero when `xs` has
/// no spread.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, count) = values.into_iter().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count as f64
}

/// A row type with a fixed CSV layout.
pub trait CsvRecord {
    const HEADER: &'static str;

    fn write_fields(&self, out: &mut String);
}

/// Renders rows as CSV with LF line endings and Rust's shortest
/// round-trip float formatting, independent of locale.
pub fn to_csv<R: CsvRecord>(rows: &[R]) -> String {
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(R::HEADER);
    out.push('\n');
    for row in rows {
        row.write_fields(&mut out);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuation::Valuation;

    #[test]
    fn substreams_differ_and_repeat() {
        let a: f64 = substream(7, 1, 2).gen();
        let b: f64 = substream(7, 1, 2).gen();
        let c: f64 = substream(7, 1, 3).gen();
        let d: f64 = substream(7, 2, 2).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn drawn_coefficients_in_range() {
        let mut rng = substream(1, 0, 0);
        for _ in 0..20 {
            let m = draw_linear_model(&mut rng, 4, true).unwrap();
            for i in 0..4 {
                assert!(m.coefficient(i, i) > 0.0);
                for j in 0..4 {
                    assert!((-1.0..1.0).contains(&m.coefficient(i, j)));
                }
            }
            assert_eq!(m.agents(), 4);
        }
    }

    #[test]
    fn slope_of_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        assert!((least_squares_slope(&xs, &ys) - 2.5).abs() < 1e-12);
        assert_eq!(least_squares_slope(&[1.0, 1.0], &[0.0, 5.0]), 0.0);
    }
}

//! Model-quality functions mapping valid data size to model quality.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type QualityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A strictly increasing map from valid data size to model quality with
/// `Q(0) = 0`.
///
/// Normalized functions are bounded by one. The unnormalized identity is
/// provided for scale-free market families whose valuations are homogeneous
/// in quality, where the absolute scale of the quality axis carries no
/// meaning.
#[derive(Clone)]
pub struct QualityFunction {
    label: String,
    eval: QualityFn,
    domain_max: f64,
    range_max: f64,
}

impl QualityFunction {
    /// Registers a custom quality function on `[0, domain_max]` whose values
    /// never exceed `range_max`.
    pub fn new<F>(label: impl Into<String>, domain_max: f64, range_max: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(domain_max > 0.0) || !(range_max > 0.0) {
            return Err(Error::InvalidArgument(
                "quality function domain and range bounds must be positive".into(),
            ));
        }
        Ok(Self {
            label: label.into(),
            eval: Arc::new(f),
            domain_max,
            range_max,
        })
    }

    /// `Q(t) = t` restricted to `[0, 1]`.
    pub fn identity() -> Self {
        Self {
            label: "identity".into(),
            eval: Arc::new(|t| t),
            domain_max: 1.0,
            range_max: 1.0,
        }
    }

    /// `Q(t) = t` on the whole half-line. Not bounded by one.
    pub fn identity_unbounded() -> Self {
        Self {
            label: "identity-unbounded".into(),
            eval: Arc::new(|t| t),
            domain_max: f64::INFINITY,
            range_max: f64::INFINITY,
        }
    }

    /// `Q(t) = (1 - e^{-t}) / (1 + e^{-t})`, i.e. `tanh(t / 2)`.
    pub fn sigmoid() -> Self {
        Self {
            label: "sigmoid".into(),
            eval: Arc::new(|t| (0.5 * t).tanh()),
            domain_max: f64::INFINITY,
            range_max: 1.0,
        }
    }

    /// Built-in normalized quality functions.
    pub fn registry() -> Vec<QualityFunction> {
        vec![Self::identity(), Self::sigmoid()]
    }

    /// Looks up a built-in function by label.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Self::identity()),
            "identity-unbounded" => Some(Self::identity_unbounded()),
            "sigmoid" => Some(Self::sigmoid()),
            _ => None,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain_max(&self) -> f64 {
        self.domain_max
    }

    /// Supremum of the function; one for normalized functions.
    pub fn range_max(&self) -> f64 {
        self.range_max
    }

    pub fn is_normalized(&self) -> bool {
        self.range_max <= 1.0
    }

    pub fn evaluate(&self, size: f64) -> Result<f64> {
        if !(size >= 0.0) || size > self.domain_max {
            return Err(Error::OutOfDomain {
                label: self.label.clone(),
                at: size,
            });
        }
        Ok((self.eval)(size))
    }
}

impl fmt::Debug for QualityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QualityFunction")
            .field("label", &self.label)
            .field("domain_max", &self.domain_max)
            .field("range_max", &self.range_max)
            .finish()
    }
}

/// The quality an agent actually deploys: the better of the allocated model
/// and the model trained on its own data.
pub fn effective_quality(allocated: f64, quality: &QualityFunction, size: f64) -> Result<f64> {
    if !(allocated >= 0.0) || allocated > quality.range_max() {
        return Err(Error::InvalidArgument(format!(
            "allocated quality {allocated} outside [0, {}]",
            quality.range_max()
        )));
    }
    if !(size >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative data size {size}")));
    }
    Ok(allocated.max(quality.evaluate(size)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn effective_quality_examples() {
        let id = QualityFunction::identity();
        assert_eq!(effective_quality(0.0, &id, 0.0).unwrap(), 0.0);
        assert_eq!(effective_quality(0.3, &id, 0.7).unwrap(), 0.7);
        let sig = QualityFunction::sigmoid();
        let q = effective_quality(0.0, &sig, 1.0).unwrap();
        // (1 - e^-1) / (1 + e^-1)
        let direct = (1.0 - (-1.0f64).exp()) / (1.0 + (-1.0f64).exp());
        assert!((q - direct).abs() < 1e-15);
        assert!((q - 0.462_117_157_260_009_8).abs() < 1e-12);
    }

    #[test]
    fn effective_quality_rejects_bad_inputs() {
        let id = QualityFunction::identity();
        assert!(effective_quality(1.5, &id, 0.2).is_err());
        assert!(effective_quality(-0.1, &id, 0.2).is_err());
        assert!(effective_quality(0.2, &id, -1.0).is_err());
        // identity on [0,1] refuses sizes past its declared domain
        assert!(effective_quality(0.2, &id, 1.5).is_err());
        assert!(effective_quality(2.0, &QualityFunction::identity_unbounded(), 1.5).is_ok());
    }

    #[test]
    fn registry_spot_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for q in QualityFunction::registry() {
            assert_eq!(q.evaluate(0.0).unwrap(), 0.0, "{}", q.label());
            // past ~20 the sigmoid saturates in double precision
            let hi = q.domain_max().min(20.0);
            for _ in 0..1000 {
                let a = rng.gen_range(0.0..hi);
                let b = rng.gen_range(0.0..hi);
                let (lo, up) = if a < b { (a, b) } else { (b, a) };
                if up - lo < 1e-9 {
                    continue;
                }
                let (ql, qu) = (q.evaluate(lo).unwrap(), q.evaluate(up).unwrap());
                assert!(qu > ql, "{} not increasing at {lo} {up}", q.label());
                assert!(qu <= 1.0);
            }
        }
    }

    #[test]
    fn exit_case_matches_own_model() {
        for q in QualityFunction::registry() {
            for k in 0..=20 {
                let t = k as f64 / 20.0;
                assert_eq!(effective_quality(0.0, &q, t).unwrap(), q.evaluate(t).unwrap());
            }
        }
    }
}

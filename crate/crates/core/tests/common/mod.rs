#![allow(dead_code)]

use std::sync::Arc;

use externa::experiments::{draw_linear_model, substream};
use externa::mechanism::{AllocationRule, BestModelAllocation, EfficientLinearAllocation};
use externa::{GridSpec, PowerMarketModel, QualityFunction, Valuation};
use rand::Rng;

/// A small random existence instance.
pub struct Instance {
    pub name: String,
    pub model: Arc<dyn Valuation>,
    pub quality: QualityFunction,
    pub alloc: Arc<dyn AllocationRule>,
    pub grid: GridSpec,
}

/// Alternates random 2-agent linear markets (sigmoid quality, efficient
/// linear allocation) and power markets with growth in `[−1, 0)`
/// (identity quality, best-model allocation), on grids with `D/ε ≤ 4`.
pub fn existence_instance(seed: u64, index: u64) -> Instance {
    let mut rng = substream(seed, 0, index);
    let intervals = rng.gen_range(1..=4usize);
    if index.is_multiple_of(2) {
        let quality = QualityFunction::sigmoid();
        let model = draw_linear_model(&mut rng, 2, false).unwrap();
        let upper = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
        Instance {
            name: format!("linear {:?} D={upper} D/eps={intervals}", model.rows()),
            alloc: Arc::new(EfficientLinearAllocation::new(&model, quality.clone())),
            model: Arc::new(model),
            quality,
            grid: GridSpec::with_intervals(upper, intervals, false).unwrap(),
        }
    } else {
        let quality = QualityFunction::identity_unbounded();
        let alpha: f64 = rng.gen_range(-1.0..0.0);
        Instance {
            name: format!("power alpha={alpha} D/eps={intervals}"),
            model: Arc::new(PowerMarketModel::new(2, alpha).unwrap()),
            alloc: Arc::new(BestModelAllocation::new(2, quality.clone())),
            quality,
            grid: GridSpec::new(intervals as f64, 1.0, false).unwrap(),
        }
    }
}

//! Criterion benchmarks for the `externa` algorithms live under `benches/`.

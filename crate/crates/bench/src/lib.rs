//! Criterion benchmarks for the predictor; see `benches/`.

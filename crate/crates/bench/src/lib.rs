//! Criterion benchmarks for the layer primitives; see `benches/`.

//! Criterion benchmarks for psdyn live in `benches/`.

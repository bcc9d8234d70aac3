//! Criterion benchmarks for the `lrclt-core` kernels live in `benches/`.

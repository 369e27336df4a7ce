//! Criterion benchmarks for `fhr-core`; see `benches/kernels.rs`.

//! Criterion benchmarks for the emotag pipeline live in `benches/`.

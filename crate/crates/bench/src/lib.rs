//! Benchmarks for the bootstrap engine live in `benches/`.

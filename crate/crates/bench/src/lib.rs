//! Criterion benchmarks for the key-generation pipeline live in `benches/`.

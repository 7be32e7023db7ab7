//! Criterion benchmarks for the measurement pipeline; see `benches/pipeline.rs`.

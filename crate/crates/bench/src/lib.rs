//! Criterion benchmarks for `ssci-core`; see `benches/pipeline.rs`.

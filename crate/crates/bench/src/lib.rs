//! Criterion benchmarks for the bathspec pipeline; see `benches/pipeline.rs`.
//! Run with `cargo bench -p bathspec-bench`.

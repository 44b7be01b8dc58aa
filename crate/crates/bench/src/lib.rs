//! Benchmark-only crate; the benchmarks live in `benches/accounting.rs`.

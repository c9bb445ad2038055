//! Criterion benchmarks for certification cost live in `benches/`; run them with `cargo bench -p dssn-bench`.

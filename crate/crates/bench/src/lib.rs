//! Criterion benchmarks for the bnm solvers live in `benches/`.

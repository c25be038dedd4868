//! Benchmarks for the estimators, the permutation engine and the simulation harness live in `benches/`.

//! Criterion benchmarks for the nodal energy, the weighted perimeter and
//! both solvers. Run with `cargo bench -p tmce-bench`.

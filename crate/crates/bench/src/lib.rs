//! Criterion benchmarks of the core solvers live in `benches/solvers.rs`:
//! one Gauss step, a full boundary value solve, the b̄₂ quadrature and a
//! monodromy loop.

//! Benchmarks for the sampler, the Q matrix and the Cholesky downdate.
//! Run with `cargo bench -p gsw-bench`.

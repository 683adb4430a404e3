// Benchmarks live under benches/; see `cargo bench -p courtformer-bench`.

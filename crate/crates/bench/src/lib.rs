// Benchmarks live under benches/. This crate exists to host them.

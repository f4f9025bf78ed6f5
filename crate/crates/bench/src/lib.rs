//! Benchmarks for `gaussweyl`; see `benches/`.

pub use gaussweyl;

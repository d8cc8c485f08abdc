//! Shared instance builders for the benchmarks.

//! Holds the full-scale acceptance gate in `tests/acceptance.rs`.
//!
//! It lives in its own package so `cargo test --workspace` runs it after the
//! fast suites of `tdse2d`.

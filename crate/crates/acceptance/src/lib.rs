//! Host crate for the `acceptance` test target.
//!
//! It lives in its own package so that a failing criterion does not stop
//! `cargo test --workspace` before the other crates' tests have run.

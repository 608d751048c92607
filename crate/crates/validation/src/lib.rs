//! Holds the `acceptance` test target. It lives in its own package so that
//! `cargo test --workspace` reaches it only after every other target has run.

//! Holds the `acceptance` test target only: `cargo test -p ergolab-verify`.
//!
//! It lives in its own package so that a failing criterion does not keep the
//! unit and integration tests of the other crates from running.

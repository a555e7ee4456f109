//! Runs every Rust snippet in the book as a doc-test, so `cargo test`
//! fails whenever a chapter drifts out of sync with the library. mdbook
//! itself cannot execute examples against external crates; including the
//! chapters as `#[doc]` attributes hands them to rustdoc instead.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/annotations.md")]
pub mod annotations {}

#[doc = include_str!("../../../book/src/decoder.md")]
pub mod decoder {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/decoding.md")]
pub mod decoding {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

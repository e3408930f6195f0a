//! The guide's chapters, compiled as doc-tests.
//!
//! Each module's documentation is a chapter of the mdbook under `book/`,
//! included verbatim, so `cargo test --doc` compiles and runs every Rust
//! snippet in the guide. A snippet that stops compiling, or an assertion
//! that stops holding, fails the test suite — the book cannot drift from
//! the API.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/clusters.md")]
mod clusters {}

#[doc = include_str!("../../../book/src/oracle.md")]
mod oracle {}

#[doc = include_str!("../../../book/src/candidates.md")]
mod candidates {}

#[doc = include_str!("../../../book/src/reward.md")]
mod reward {}

#[doc = include_str!("../../../book/src/policy.md")]
mod policy {}

#[doc = include_str!("../../../book/src/bound.md")]
mod bound {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}

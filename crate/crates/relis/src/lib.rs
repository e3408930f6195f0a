//! Extractive multi-document summarisation by *reward learning for
//! reinforcement learning*.
//!
//! The pipeline has two halves:
//!
//! 1. **Cross-input reward learning.** At training time a utility function
//!    over summaries is fit with learning-to-rank losses against a
//!    ROUGE-derived oracle ([`rouge`], [`sampling`], [`l2r`]).
//! 2. **Input-specific policy learning.** At test time a fresh
//!    temporal-difference policy is trained *per input cluster* against the
//!    learned utility, then rolled out greedily to produce the summary
//!    ([`rlmdp`]).
//!
//! [`ranking`] supplies the rank statistics tying the two halves together
//! (the oracle ranks, rank correlations, and the empirical near-optimality
//! check), [`features`] the hand-crafted summary representation, [`corpus`]
//! the document-cluster model, and [`pipeline`] the end-to-end drivers used
//! by the `relis` binary.

pub mod corpus;
pub mod error;
pub mod features;
pub mod l2r;
pub mod pipeline;
pub mod ranking;
pub mod rlmdp;
pub mod rouge;
pub mod sampling;

#[cfg(doctest)]
mod book;

pub use error::{RelisError, Result};

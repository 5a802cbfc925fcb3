//! Ensemble sampling as a tractable approximation to Thompson sampling.
//!
//! The crate provides exact Thompson sampling and ensemble sampling for
//! linear-Gaussian bandits, anchored neural ensembles with ε-greedy and
//! dropout baselines, oracles for the posterior optimal-action distribution,
//! and a deterministic parallel experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod linear;
pub mod neural;
pub mod rng;
pub mod stats;
pub mod verify;

#[cfg(feature = "cli")]
pub mod cli;


pub use error::{Error, Result};
pub use rng::SeededRng;

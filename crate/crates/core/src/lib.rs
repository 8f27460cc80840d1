//! Offline-RL bandwidth estimation toolkit.
//!
//! The crate bundles a small neural-network kernel, the offline dataset
//! pipeline, the Gaussian-mixture policy with its conservative action rule,
//! the Q-ensemble critic and its trainer, a packet-level link simulator with
//! an AIMD baseline, the uncertainty-gated hybrid controller and the
//! evaluation metrics.

pub mod controller;
pub mod critic;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod lbfgs;
pub mod nn;
pub mod policy;
pub mod seed;
pub mod sim;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};

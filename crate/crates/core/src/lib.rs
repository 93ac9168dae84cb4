//! Causally guided multi-objective configuration tuning.
//!
//! The pipeline learns a causal graph from observational runs, ranks
//! configuration options by their average causal effect on the objectives,
//! and runs constrained multi-objective Bayesian optimization over the
//! options that matter.

pub mod bench;
pub mod causal;
pub mod cli;
pub mod data;
pub mod effects;
pub mod error;
pub mod gp;
pub mod mobo;
pub mod par;
pub mod seed;
pub mod space;

pub use error::{Error, ErrorClass, Result};

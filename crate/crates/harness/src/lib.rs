//! Experiment runner for the `odenet` command: depth-scaling studies,
//! the closed-form tightness suite, linear gradient-flow experiments and
//! toy training. Every run is seeded and writes CSV tables.

// `!(a < b)` is used on purpose so that NaN lands in the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod linflow;
pub mod profiles;
pub mod study;
pub mod tightness;
pub mod train;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};

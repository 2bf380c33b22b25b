//! Experiment harness for the `ggt-core` optimizers: TOML configs, seeded
//! runs with feasibility backtracking, CSV traces and spectra, comparisons,
//! step-cost benchmarks and the theory experiments.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod compare;
pub mod config;
pub mod error;
pub mod rng;
pub mod run;
pub mod theory_run;
pub mod trace;

pub use error::{HarnessError, Result};

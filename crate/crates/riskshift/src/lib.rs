#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Experiment harness for `riskshift-core`: configuration files, seeded
//! multi-trial sweeps, CSV output and the acceptance suite behind
//! `riskshift selftest`.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod harness;
pub mod table;

pub use error::{HarnessError, Result};

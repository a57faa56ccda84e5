//! Scenario runner for the `coldamp` toolkit: configuration parsing,
//! validation, execution and artifact manifests.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundled;
pub mod cli;
pub mod config;
pub mod error;
pub mod keys;
pub mod modes;
pub mod run;
pub mod scenario;

pub use error::CliError;
pub use run::{run, validate, Manifest, Overrides, RunOutcome, Source};

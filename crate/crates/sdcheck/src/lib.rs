//! File formats and the experiment runner for `sdcheck-core`.
//!
//! Instances are stored as JSON, path traces and ratio curves as CSV, and
//! diagnostics as `report.json`. Every float is written with 17 significant
//! digits so that reruns are byte-identical.

pub mod artifacts;
pub mod error;
pub mod instance;
pub mod json;
pub mod run;

pub use error::{CliError, Result};

//! File formats, reports and the command line for the `emiim-core`
//! pipeline.
//!
//! * [`log`]: delimited call-log files in and out, plus the labeled dataset dump.
//! * [`scenario`]: the line-based planted-rule scenario syntax and the
//!   built-in scenarios.
//! * [`model_file`]: versioned JSON model persistence.
//! * [`report`]: evaluation and comparison tables, text and delimited.
//! * [`cli`]: the `emiim` binary.

pub mod cli;
pub mod error;
pub mod log;
pub mod model_file;
pub mod report;
pub mod scenario;

pub use crate::error::{Error, Result};

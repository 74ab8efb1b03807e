//! Context-aware modeling of incoming-call behavior.
//!
//! The crate turns call-log records into categorical context vectors
//! (time segment, day of week, location, social contact), learns either a
//! single Gini decision tree (MIIM) or a bagged random forest (E-MIIM), and
//! evaluates both with k-fold cross validation.
//!
//! Everything here is pure computation over in-memory values and builds
//! under `no_std` with `alloc`. Parsing of log files, model persistence and
//! the command line live in the `emiim` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod context;
pub mod domain;
pub mod error;
pub mod eval;
pub mod forest;
pub mod model;
pub mod segmentation;
pub mod synth;
pub mod tree;

pub use crate::domain::{
    BehaviorClass, CallRecord, CallType, ClassCounts, ContextVector, Dataset, LabeledExample,
};
pub use crate::error::{Error, Result};

//! Sound predictive data-race detection over concurrent execution traces.

#![allow(clippy::needless_range_loop)]

pub mod generators;
pub mod ideal_engine;
pub mod oracle;
pub mod orders;
pub mod predict;
pub mod realizability;
pub mod trace_model;

//! Harness around the `mimp` library: synthetic datasets, calibration,
//! index/query stages, evaluation, baselines, privacy reports and timing.

pub mod baselines;
pub mod bench;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod pipeline;
pub mod privacy_report;

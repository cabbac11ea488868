//! Experiment harness around `slopebench-core`: a registry of benchmark
//! problems, JSON-configured runs, a diagnostic check suite, and report
//! emission. The `slopebench` binary is a thin shell over this library.

pub mod checks;
pub mod config;
pub mod problems;
pub mod report;
pub mod runner;

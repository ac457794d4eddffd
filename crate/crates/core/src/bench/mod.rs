//! Configuration-driven benchmark runner.
//!
//! Reproduces the demonstration cases at desk scale from flat key=value
//! config files, writing singular-value trajectories, boundary-mode
//! trajectories and error series as CSV.

pub mod cases;
pub mod config;
pub mod csv;
pub mod runner;

pub use cases::{build_case, BoundaryMetric, CaseSetup};
pub use config::{CaseConfig, CaseKind, Method, Preset, Sampling};
pub use runner::{run_case, MethodReport, RunReport};

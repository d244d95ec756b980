//! Scenario runner for the quadruped visual servoing stack.
//!
//! Wires the controller to the simulator, runs the built-in catalog or a
//! config file, and writes CSV traces plus a JSON summary.

pub mod config;
pub mod controller;
pub mod error;
pub mod metrics;
pub mod output;
pub mod runner;
pub mod scenarios;

pub use config::{ObserverMode, RunConfig};
pub use controller::{ControlError, ServoController, TickLog};
pub use error::HarnessError;
pub use metrics::{compare_runs, compute_metrics, Comparison, RunMetrics};
pub use output::{write_comparison, write_run};
pub use runner::{run_scenario, RunOutput, TraceRow};
pub use scenarios::{scenario_config, Scenario, CATALOG};

//! Scenario-driven front end for the tube mass laboratory: config parsing,
//! execution, deterministic artifact emission, and the bundled verification
//! suite.

pub mod config;
pub mod plot;
pub mod report;
pub mod runner;
pub mod scene;
pub mod verify;

pub use config::{ConfigError, Scenario, Task};
pub use report::{RunReport, TaskOutcome, Verdict};
pub use runner::{execute, figures, RunError};

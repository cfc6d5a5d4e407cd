//! Experiment harness around `bde-core`: scenario files, seeded closed-loop
//! runs, CSV reports, scheme comparisons and the VI timing benchmark.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod report;
pub mod runner;

pub use config::ScenarioConfig;
pub use error::{HarnessError, Result};
pub use report::{Aggregates, RunReport, SchemeStats, SlotRow};
pub use runner::{compare, run};

//! Run configuration, scenario execution and output files.

pub mod config;
pub mod output;
pub mod scenario;

pub use config::{validate_config, RunConfig};
pub use scenario::{run_scenario, simulate, RunReport, RunStatus};

//! Library surface of the scenario runner; the `twinbeam` binary is a thin
//! wrapper around these modules.

pub mod config;
pub mod report;
pub mod scenario;

pub use config::{ScenarioConfig, ScenarioKind};
pub use report::{RunError, RunReport};
pub use scenario::{compare_pipelines, run_scenario, Tolerances};

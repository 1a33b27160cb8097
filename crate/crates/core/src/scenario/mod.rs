//! Scenario configuration, built-in presets and the simulation driver.

pub mod build;
pub mod config;
pub mod presets;
pub mod run;

pub use build::{build_scenario, Scenario, StentProgram};
pub use config::{parse_config, Dim, GeometryKind, Quantity, ScenarioConfig, SCHEMA_VERSION};
pub use presets::{preset_text, PRESETS};
pub use run::{
    convergence_csv, convergence_from_config, convergence_study, emit_snapshot, grid_displacements, run_scenario,
    snapshot_csv, ConvergenceRow, ProbeRecord, RunOptions, RunOutcome, Runner,
};

//! Scenario generators, the K-sweep harness and the dual-run validator.

pub mod scenario;
pub mod sweep;
pub mod validate;

pub use scenario::{make_scenario, Scenario, ScenarioError, ScenarioKind};
pub use sweep::{
    emit_report, improvement, parse_report, read_report, run_sweep, write_report, BenchError, SweepMode, SweepOptions,
    SweepReport, SweepRow, BASELINE_K, DEFAULT_K_GRID, UNIFORM_SKIN_K,
};
pub use validate::{validate_scenario, ValidationReport};

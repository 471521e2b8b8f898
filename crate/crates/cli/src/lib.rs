//! Experiment runner library behind the `sculi` binary: configuration,
//! scenario execution, sweeps, calibration.

pub mod calibrate;
pub mod config;
pub mod run;

pub use calibrate::{calibrate, day_variation, spearman, spread, CalibrateError};
pub use config::{resolve_scenario, Config, ConfigError, ResolvedScenario};
pub use run::{
    attack_trace, rerun_manifest, run_scenario_repeat, run_sweep, AttackOptions, Manifest,
    RunError, RunOutcome, SweepResult,
};

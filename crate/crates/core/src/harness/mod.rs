//! Experiment orchestration: configs, regime dispatch, replicate execution
//! and report emission.

pub mod config;
pub mod fixtures;
pub mod regime;
pub mod report;
pub mod run;

pub use config::{parse_config_text, read_config_file, ExperimentConfig, ExperimentKind, Format, LawSpec, ModelKind, Regime};
pub use regime::{resolve, Plan, Statistic, Target, REGIME_TABLE};
pub use report::{emit_report, Report};
pub use run::run_experiment;

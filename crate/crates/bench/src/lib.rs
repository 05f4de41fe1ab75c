//! Seeded benchmark harness: experiment configs, solver runs and CSV output.

pub mod config;
pub mod experiment;
pub mod summary;

pub use config::{ConfigError, ExperimentConfig, InitSpec, ProblemSpec, SolverSpec};
pub use experiment::{run_experiment, ExperimentOutput, RunOutcome};
pub use summary::{emit_summary, Arm, SummaryError};

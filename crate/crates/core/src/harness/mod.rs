//! Experiment harness: configuration, seeded runs, batches, phase analysis
//! and report output.

pub mod batch;
pub mod config;
pub mod output;
pub mod phases;
pub mod run;
pub mod sweep;

pub use batch::{run_batch, Aggregate, BatchResult};
pub use config::{AgentKind, ExperimentConfig, WorldSource, REFERENCE_ARENA_SEED};
pub use phases::{detect_phases, PhaseReport};
pub use run::{run_experiment, run_experiment_full, Decider, LogRow, RunArtifacts, RunLog};
pub use sweep::{sweep_eta, EtaPoint};

//! Experiment harness: synthetic task generators, config ingestion, seeded
//! end-to-end runs, and metrics persistence.

mod config;
mod experiment;
mod task;

pub use config::{parse_config, ExperimentConfig, MethodConfig};
pub use experiment::{
    load_checkpoint, load_pairs, records_to_csv, run_experiment, RunArtifacts, RunSummary,
    OUTPUT_ROOT_ENV,
};
pub use task::{gen_task, optimal_rank_residual, Task, TaskKind, TaskSpec};

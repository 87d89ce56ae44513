//! Config-driven experiments, reports and checkpoints.

mod checkpoint;
mod config;
mod report;
mod run;

pub use checkpoint::{checkpoint_from_str, checkpoint_load, checkpoint_save, checkpoint_to_string, CHECKPOINT_VERSION};
pub use config::{AdaptSection, EnsembleSection, ExperimentConfig, TaskSpec, TrainSection};
pub use report::{emit_report, read_metrics, read_summary, MetricRow};
pub use run::{
    evaluate_seed, finetune_baseline, prepare_task, run_experiment, run_seed, train_model, Aggregate, Metric,
    RunReport, Scoring, SeedResult, Stat, TaskData,
};

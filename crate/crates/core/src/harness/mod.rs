//! Configuration, train/evaluate driver and metrics output.

pub mod config;
pub mod driver;
pub mod metrics;

pub use config::{Overrides, RunConfig, RunSettings, Scenario};
pub use driver::{
    evaluate, evaluate_to_dir, load_checkpoint, replicas, save_checkpoint, train, train_to_dir, ActionRule,
    EvalOutput, RunSummary, TrainArtifacts, TrainOutput,
};
pub use metrics::{postprocess, read_metrics_csv, write_metrics_csv, MetricsRow};

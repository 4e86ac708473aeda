//! Experiment configuration, the end-to-end pipeline, aggregation and the
//! command-line interface.

mod aggregate;
mod cli;
mod config;
mod pipeline;
mod store;

pub use aggregate::{emit_tables, AggregateEntry, AggregateReport, FailedRun, Stat, TABLES};
pub use cli::{run_cli, OUTPUT_DIR_ENV};
pub use config::ExperimentConfig;
pub use pipeline::{
    apply, evaluate, evaluation_negatives, forget_split, run_experiment, run_single, EvalSets,
    RunReport,
};
pub use store::{load_predictor, save_predictor, PredictorMeta, TrainedArtifacts};

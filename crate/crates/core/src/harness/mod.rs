//! Seeded end-to-end experiments on synthetic multiple-choice questions.
//!
//! Each question gets its own policy context. Difficulty is set by the initial probability of
//! the gold letter: high for the easy tier, low for the hard tier. Three training modes share
//! the setup: a supervised baseline on one fixed gold response, plain GRPO, and GRPO with
//! response resampling and difficulty reweighting. Accuracy and format rate are computed
//! exactly from the policy, not sampled.

mod config;
mod eval;
mod init;
mod report;
mod tasks;
mod train;

pub use config::{
    DataSource, ExperimentConfig, Mode, PolicyInit, SftConfig, SyntheticSpec, SCHEMA_VERSION,
};
pub use eval::{
    evaluate, evaluate_question, held_out_lengths, robust_accuracy_question, EvalSummary,
    QuestionEval,
};
pub use init::{init_policy, vocabulary};
pub use report::{report, ReportInput, ReportOutput};
pub use tasks::{make_synthetic_tasks, TaskSet, Tier, SYNTHETIC_CATALOG};
pub use train::{
    prepare, read_metrics, run_experiment, sft_template, train, write_metrics, MetricsRow,
    RunArtifacts, TrainOutcome, METRICS_COLUMNS,
};

//! Training loops, grid search, evaluation, experiment configuration and checkpoints.

mod config;
mod evaluate;
mod grid;
mod metrics;
mod model;
mod train;

pub use config::{tuned_optimum, ExperimentConfig, Task, AE_OPTIMUM};
pub use evaluate::{
    dump_attention, evaluate, export_st, majority_closed_form, majority_report, write_jsonl, AttentionRecord,
};
pub use grid::{
    cross_domain_from_config, cross_domain_grid, cross_domain_run, grid_points, grid_search, grid_search_prepared,
    grid_table, parse_grid, rank, CrossDomainReport, GridResult,
};
pub use metrics::{macro_f1, macro_f1_sliced, scores, MetricsReport, Scores};
pub use model::{meta_path, Model, ModelBundle, ModelMeta, META_FORMAT};
pub use train::{
    classifier_report, label_histogram, load_dataset, prepare, stratified_split, tagger_scores, train, train_prepared,
    write_log, EpochLog, PreparedData, RunFiles, TrainOutcome,
};

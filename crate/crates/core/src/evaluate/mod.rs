//! Cross-validation, feature-combination experiments and effort-aware ranking.

mod effort;
mod experiment;
mod folds;
mod pipeline;
mod report;

pub use effort::{effort_rank, effort_score, RankedChange, EFFORT_FLOOR};
pub use experiment::{
    kfold_cv, kfold_repetition, mean_defined, run_experiment, run_on, CombinationResult,
    ExperimentReport, ExperimentSpec, FoldResult,
};
pub use folds::FoldPlan;
pub use pipeline::TrainedPipeline;
pub use report::{spec_from_report, ReportFormat, CONFIG_MARKER};

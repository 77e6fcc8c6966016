//! Cross-validation, scoring, baselines and fairness analysis.

mod baseline;
mod fairness;
mod folds;
mod metrics;
mod report;

use thiserror::Error;

pub use baseline::{
    age_bin, demographic_baseline, random_baseline, AdamConfig, DemographicEncoder, DemographicModel, Mlp, MlpConfig,
    MlpGradients,
};
pub use fairness::{cdd, CddExample, ConflictCdd, FairnessReport, StratumCount, GROUP_DEFINITION};
pub use folds::{stratified_kfold, FoldAssignment};
pub use metrics::{confidence_interval, confusion_matrix, weighted_f1, Z_95};
pub use report::{
    BaselineRow, CiBasis, ConflictResult, EvalReport, FoldAudit, ProvenanceAudit, ReportRow, ScoreSummary,
    REPORT_FORMAT, REPORT_VERSION,
};

pub use crate::pipeline::run_experiment;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{got} examples cannot fill {n_folds} folds")]
    TooFewExamples { got: usize, n_folds: usize },
    #[error("n_folds must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("interview {0} has no demographics")]
    MissingDemographics(String),
    #[error("{preds} predictions for {truth} labels")]
    LengthMismatch { preds: usize, truth: usize },
    #[error("nothing to score")]
    Empty,
    #[error("a confidence interval needs at least 2 scores, got {0}")]
    TooFewScores(usize),
    #[error("confidence level {0} outside (0, 1)")]
    InvalidLevel(f64),
    #[error("empty training set")]
    EmptyTraining,
    #[error("no true-label stratum contains both groups")]
    SingleGroupOnly,
}

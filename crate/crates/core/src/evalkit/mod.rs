//! Calibration, fold protocols, label transforms and metrics.
//!
//! Slopes follow the calibration convention: predictions are regressed on
//! labels (`ŷ = p·y + q`), so a model that under-predicts spread has p < 1.

mod folds;
mod metrics;

pub use folds::{
    fold_runner, AuditedLabels, FoldFailure, FoldMode, FoldPlan, FoldResult, LabelSource, MetricSummary, Phase,
    RunResult, SamplePrediction, Split, TrainOutput, TrainRequest,
};
pub use metrics::{
    binarize_mic, calibrate, log10_transform, metrics, ols_fit, pearson_r2, precision_recall, r_squared, rmse,
    roc_auc, roc_points, CalibrationParams, Metrics, MicLabel, Task, DECISION_THRESHOLD, MIN_SLOPE,
};

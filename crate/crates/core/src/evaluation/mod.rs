//! Metrics, cross-validation, grid search, hypothesis tests, early detection
//! and error export.

mod early;
mod export;
mod metrics;
mod pipeline;
pub mod stats;

pub use early::{detect_profile, detection_curve, early_detection, CurvePoint, Detection, EarlyDetectionCurve};
pub use export::{
    export_misclassified, misclassified, positive_documents, recall_only_eval, MisclassifiedRow, RecallReport,
};
pub use metrics::{confusion_and_metrics, EvalMetrics, MeanMetrics};
pub use pipeline::{
    cross_validate, default_grid, evaluate, fit_fold, fit_pipeline, grid_search, make_folds, predict_documents,
    CvReport, GridReport, PipelineConfig,
};
pub use stats::{cohens_d, holm_bonferroni, mann_whitney_u, paired_ttest, HolmResult, StatTestResult, TestKind};

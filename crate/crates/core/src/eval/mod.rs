//! Confusion matrices, per-class and weighted metrics, Cohen's kappa, and
//! k-fold cross validation of the two models.

mod cv;
mod metrics;

pub use self::cv::{
    compare_models, cross_validate, kfold_split, stratified_kfold_split, Comparison, CvOptions,
    DatasetComparison, EvalReport, FoldResult, ModelAverages,
};
pub use self::metrics::{
    class_metrics, confusion, f_measure, kappa, weighted_average, ClassMetrics, ConfusionMatrix,
    Summary, WeightedMetrics,
};

//! Evaluation harness: rolling-origin cross-validation, accuracy metrics,
//! feature-set comparisons, ablation, permutation importance, partial
//! dependence, error breakdowns, and CSV rendering of all of it.

pub mod breakdown;
pub mod cv;
pub mod features;
pub mod folds;
pub mod forecasters;
pub mod importance;
pub mod metrics;
pub mod pdp;
pub mod report;

use serde::Serialize;

/// A scored slice of forecasts: which model, which slice of the data
/// (a feature set, an hour of day, a region, ...), and how it did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub model: String,
    pub slice: String,
    pub rmse: f64,
    pub smape: f64,
    pub n: usize,
}

pub use breakdown::{error_breakdown, BreakdownKey, BreakdownReport};
pub use cv::{rolling_cv, CvReport, FoldEval, ResidualRecord};
pub use features::{
    ablate_one_by_one, evaluate_feature_sets, AblationReport, AblationRow, SetSelector,
};
pub use folds::{make_fold_plan, Fold, FoldPlan};
pub use forecasters::{
    network_inputs, HarnessSettings, NetSettings, OneStepForecaster, OracleForecaster,
    PersistenceForecaster, RidgeArxForecaster, SeasonalNaiveForecaster, UberNetForecaster,
};
pub use importance::{permutation_importance, ImportanceReport, ImportanceRow};
pub use metrics::{rmse, smape};
pub use pdp::{partial_dependence, PdpCurve, PdpPoint};

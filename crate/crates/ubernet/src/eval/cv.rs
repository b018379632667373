//! Rolling cross-validation over [`OneStepForecaster`] models.

use chrono::NaiveDateTime;
use rayon::prelude::*;
use serde::Serialize;

use super::folds::FoldPlan;
use super::forecasters::OneStepForecaster;
use super::metrics::{rmse, smape};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::panel::Panel;

/// One evaluated timestamp: what the model said and what happened.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRecord {
    pub model: String,
    pub fold: usize,
    pub slot: usize,
    pub time: NaiveDateTime,
    pub region: String,
    pub forecast: f64,
    pub actual: f64,
}

/// Outcome of a single fold: metrics on success, the error message on
/// failure (a failed fold never poisons the others).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldEval {
    pub fold: usize,
    pub train_start: usize,
    pub train_end: usize,
    pub test_start: usize,
    pub test_end: usize,
    /// Evaluated timestamps (0 when the fold failed).
    pub n: usize,
    pub rmse: Option<f64>,
    pub smape: Option<f64>,
    pub error: Option<String>,
}

/// Per-fold metrics plus pooled metrics over the concatenation of all
/// successful folds' residuals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub model: String,
    pub folds: Vec<FoldEval>,
    pub pooled_n: usize,
    pub pooled_rmse: Option<f64>,
    pub pooled_smape: Option<f64>,
    /// Indices of folds that failed; non-empty flags a partial report.
    pub failed_folds: Vec<usize>,
    #[serde(skip)]
    pub residuals: Vec<ResidualRecord>,
}

fn run_fold(
    panel: &Panel,
    model: &mut Box<dyn OneStepForecaster + Send>,
    fold_idx: usize,
    train: std::ops::Range<usize>,
    test: std::ops::Range<usize>,
) -> std::result::Result<Vec<ResidualRecord>, String> {
    model
        .fit(panel, train.end)
        .map_err(|e| format!("fit failed: {e}"))?;
    let mut records = Vec::with_capacity(test.len());
    for t in test {
        let raw = model
            .predict(panel, t)
            .map_err(|e| format!("prediction at slot {t} failed: {e}"))?;
        if !raw.is_finite() {
            return Err(format!("prediction at slot {t} is not finite ({raw})"));
        }
        // Demand counts are non-negative; forecasts are clamped at the
        // metrics boundary so every model is scored on the same footing.
        let forecast = raw.max(0.0);
        records.push(ResidualRecord {
            model: model.name().to_string(),
            fold: fold_idx,
            slot: t,
            time: panel.grid.slot_start(t),
            region: panel.scope.label().to_string(),
            forecast,
            actual: panel.pickups[t],
        });
    }
    Ok(records)
}

/// Runs the plan: per fold, a fresh model from `factory` (seeded from
/// `base_seed` and the fold index) is fitted on the fold's training range
/// and scored teacher-forced over its test block, in raw pickup units.
/// Folds run in parallel; results are merged in fold order, so the report
/// is bitwise reproducible regardless of thread count.
pub fn rolling_cv<F>(
    panel: &Panel,
    factory: F,
    plan: &FoldPlan,
    base_seed: u64,
) -> Result<CvReport>
where
    F: Fn(u64) -> Box<dyn OneStepForecaster + Send> + Sync,
{
    if plan.folds.is_empty() {
        return Err(Error::contract("fold plan has no folds"));
    }
    if plan.test_end() > panel.slots() {
        return Err(Error::contract(format!(
            "fold plan covers {} slots but the panel has {}",
            plan.test_end(),
            panel.slots()
        )));
    }

    let outcomes: Vec<(String, std::result::Result<Vec<ResidualRecord>, String>)> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let seed = derive_seed(base_seed, &format!("fold:{i}"));
            let mut model = factory(seed);
            let name = model.name().to_string();
            let outcome = run_fold(panel, &mut model, i, fold.train.clone(), fold.test.clone());
            (name, outcome)
        })
        .collect();

    let model_name = outcomes[0].0.clone();
    let mut folds = Vec::with_capacity(plan.folds.len());
    let mut failed = Vec::new();
    let mut residuals: Vec<ResidualRecord> = Vec::new();
    for (i, (fold, (_, outcome))) in plan.folds.iter().zip(&outcomes).enumerate() {
        let base = FoldEval {
            fold: i,
            train_start: fold.train.start,
            train_end: fold.train.end,
            test_start: fold.test.start,
            test_end: fold.test.end,
            n: 0,
            rmse: None,
            smape: None,
            error: None,
        };
        match outcome {
            Ok(records) => {
                let forecasts: Vec<f64> = records.iter().map(|r| r.forecast).collect();
                let actuals: Vec<f64> = records.iter().map(|r| r.actual).collect();
                folds.push(FoldEval {
                    n: records.len(),
                    rmse: Some(rmse(&forecasts, &actuals)?),
                    smape: Some(smape(&forecasts, &actuals)?),
                    ..base
                });
                residuals.extend(records.iter().cloned());
            }
            Err(msg) => {
                failed.push(i);
                folds.push(FoldEval {
                    error: Some(msg.clone()),
                    ..base
                });
            }
        }
    }

    let (pooled_rmse, pooled_smape) = if residuals.is_empty() {
        (None, None)
    } else {
        let forecasts: Vec<f64> = residuals.iter().map(|r| r.forecast).collect();
        let actuals: Vec<f64> = residuals.iter().map(|r| r.actual).collect();
        (
            Some(rmse(&forecasts, &actuals)?),
            Some(smape(&forecasts, &actuals)?),
        )
    };

    Ok(CvReport {
        model: model_name,
        folds,
        pooled_n: residuals.len(),
        pooled_rmse,
        pooled_smape,
        failed_folds: failed,
        residuals,
    })
}

//! Feature-set comparison and one-by-one feature ablation.
//!
//! Both analyses retrain the network from the same seed on panels that
//! differ only in their feature columns, then score teacher-forced
//! one-step forecasts on the fixed chronological test split — so a row's
//! metric movement is attributable to the feature change alone.

use rayon::prelude::*;
use serde::Serialize;

use super::forecasters::{HarnessSettings, OneStepForecaster, UberNetForecaster};
use super::metrics::{rmse, smape};
use super::EvalReport;
use crate::error::{Error, Result};
use crate::panel::{Panel, SetTag};

/// Which feature family (or the full set) to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetSelector {
    Tag(SetTag),
    All,
}

impl SetSelector {
    pub fn label(&self) -> String {
        match self {
            SetSelector::Tag(t) => t.to_string(),
            SetSelector::All => "all".to_string(),
        }
    }

    /// Parses `A`–`D` or `all` (case-insensitive).
    pub fn parse(s: &str) -> Option<SetSelector> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Some(SetSelector::All);
        }
        SetTag::parse(s).map(SetSelector::Tag)
    }
}

/// Trains the network on `panel` and scores it over the held-out tail.
/// Returns (rmse, smape, n) in raw pickup units, forecasts clamped ≥ 0.
pub(crate) fn single_split_eval(
    panel: &Panel,
    settings: &HarnessSettings,
) -> Result<(f64, f64, usize)> {
    let slots = panel.slots();
    if settings.train_end >= slots {
        return Err(Error::contract(format!(
            "train end {} leaves no test slots in a panel of {slots}",
            settings.train_end
        )));
    }
    let mut model = UberNetForecaster::new(
        settings.net.clone(),
        settings.loss,
        settings.fit,
    );
    model.fit(panel, settings.train_end)?;
    let mut forecasts = Vec::with_capacity(slots - settings.train_end);
    let mut actuals = Vec::with_capacity(slots - settings.train_end);
    for t in settings.train_end..slots {
        let raw = model.predict(panel, t)?;
        if !raw.is_finite() {
            return Err(Error::numeric(format!(
                "prediction at slot {t} is not finite ({raw})"
            )));
        }
        forecasts.push(raw.max(0.0));
        actuals.push(panel.pickups[t]);
    }
    Ok((
        rmse(&forecasts, &actuals)?,
        smape(&forecasts, &actuals)?,
        forecasts.len(),
    ))
}

/// Retrains the model per requested feature family (pickups always stay in
/// the input and the target) and reports held-out accuracy per family.
/// Duplicate selectors collapse to one row; rows keep request order.
pub fn evaluate_feature_sets(
    panel: &Panel,
    sets: &[SetSelector],
    settings: &HarnessSettings,
) -> Result<Vec<EvalReport>> {
    let mut unique: Vec<SetSelector> = Vec::new();
    for sel in sets {
        if !unique.contains(sel) {
            unique.push(*sel);
        }
    }
    if unique.is_empty() {
        return Err(Error::contract("no feature sets requested"));
    }
    // Build each subset panel up front so selector errors surface before
    // any training starts.
    let mut jobs: Vec<(SetSelector, Panel)> = Vec::with_capacity(unique.len());
    for sel in unique {
        let sub = match sel {
            SetSelector::All => panel.clone(),
            SetSelector::Tag(tag) => {
                let sub = panel.with_feature_sets(&[tag])?;
                if sub.schema.is_empty() {
                    return Err(Error::contract(format!(
                        "feature set {tag} matches no features in this panel"
                    )));
                }
                sub
            }
        };
        jobs.push((sel, sub));
    }
    jobs.par_iter()
        .map(|(sel, sub)| {
            let (rmse, smape, n) = single_split_eval(sub, settings)?;
            Ok(EvalReport {
                model: "ubernet".to_string(),
                slice: sel.label(),
                rmse,
                smape,
                n,
            })
        })
        .collect()
}

/// One ablation row: the model retrained without `feature`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub feature: String,
    pub rmse: Option<f64>,
    pub smape: Option<f64>,
    /// `rmse − base_rmse`; positive means removing the feature hurt.
    pub delta_rmse: Option<f64>,
    pub error: Option<String>,
}

/// Full-model baseline plus one row per removed input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub base_rmse: f64,
    pub base_smape: f64,
    pub rows: Vec<AblationRow>,
}

/// Removes each model input in turn — every schema feature, plus a final
/// `p` row where past pickups leave the input but remain the target — and
/// retrains from the same seed. Training failures are reported per row.
pub fn ablate_one_by_one(panel: &Panel, settings: &HarnessSettings) -> Result<AblationReport> {
    if panel.schema.len() < 2 {
        return Err(Error::contract(format!(
            "ablation needs at least 2 features, got {}",
            panel.schema.len()
        )));
    }
    let (base_rmse, base_smape, _) = single_split_eval(panel, settings)?;

    enum Job {
        WithoutFeature(String),
        WithoutPickups,
    }
    let mut jobs: Vec<Job> = panel
        .schema
        .names()
        .iter()
        .map(|n| Job::WithoutFeature(n.to_string()))
        .collect();
    jobs.push(Job::WithoutPickups);

    let rows: Vec<AblationRow> = jobs
        .par_iter()
        .map(|job| {
            let (label, outcome) = match job {
                Job::WithoutFeature(name) => {
                    let outcome = panel
                        .without_feature(name)
                        .and_then(|sub| single_split_eval(&sub, settings));
                    (name.clone(), outcome)
                }
                Job::WithoutPickups => {
                    let mut s = settings.clone();
                    s.net.include_pickups = false;
                    ("p".to_string(), single_split_eval(panel, &s))
                }
            };
            match outcome {
                Ok((rmse, smape, _)) => AblationRow {
                    feature: label,
                    rmse: Some(rmse),
                    smape: Some(smape),
                    delta_rmse: Some(rmse - base_rmse),
                    error: None,
                },
                Err(e) => AblationRow {
                    feature: label,
                    rmse: None,
                    smape: None,
                    delta_rmse: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    Ok(AblationReport {
        base_rmse,
        base_smape,
        rows,
    })
}

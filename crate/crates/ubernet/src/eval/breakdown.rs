//! Error breakdowns: regroup pooled residuals by hour of day or by region
//! and score each slice separately.

use std::collections::BTreeMap;

use chrono::Timelike;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::cv::ResidualRecord;
use crate::eval::metrics::{rmse, smape};
use crate::eval::EvalReport;

/// What to slice residuals by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakdownKey {
    Hour,
    Region,
}

impl BreakdownKey {
    pub fn label(&self) -> &'static str {
        match self {
            BreakdownKey::Hour => "hour",
            BreakdownKey::Region => "region",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "hour" => Ok(BreakdownKey::Hour),
            "region" => Ok(BreakdownKey::Region),
            other => Err(Error::input(format!(
                "unknown breakdown key '{other}' (expected 'hour' or 'region')"
            ))),
        }
    }
}

impl std::fmt::Display for BreakdownKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BreakdownReport {
    pub key: BreakdownKey,
    /// One scored slice per observed group, sorted by group label
    /// (numerically for hours, lexicographically for regions).
    pub slices: Vec<EvalReport>,
    /// Group labels that never occur in the residuals — hours of day the
    /// test windows skipped. Always empty for region breakdowns.
    pub omitted: Vec<String>,
}

/// Groups residual records by `by` and computes RMSE/SMAPE per group.
pub fn error_breakdown(records: &[ResidualRecord], by: BreakdownKey) -> Result<BreakdownReport> {
    if records.is_empty() {
        return Err(Error::contract("cannot break down an empty residual set"));
    }
    // BTreeMap keyed so iteration order is the report order.
    let mut groups: BTreeMap<(u32, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for rec in records {
        let key = match by {
            BreakdownKey::Hour => {
                let h = rec.time.hour();
                (h, format!("{h:02}"))
            }
            BreakdownKey::Region => (0, rec.region.clone()),
        };
        let entry = groups.entry(key).or_default();
        entry.0.push(rec.forecast);
        entry.1.push(rec.actual);
    }

    let model = records[0].model.clone();
    let mut slices = Vec::with_capacity(groups.len());
    for ((_, label), (forecasts, actuals)) in &groups {
        slices.push(EvalReport {
            model: model.clone(),
            slice: label.clone(),
            rmse: rmse(forecasts, actuals)?,
            smape: smape(forecasts, actuals)?,
            n: forecasts.len(),
        });
    }

    let omitted = match by {
        BreakdownKey::Hour => {
            let seen: Vec<u32> = groups.keys().map(|(h, _)| *h).collect();
            (0..24)
                .filter(|h| !seen.contains(h))
                .map(|h| format!("{h:02}"))
                .collect()
        }
        BreakdownKey::Region => Vec::new(),
    };

    Ok(BreakdownReport { key: by, slices, omitted })
}

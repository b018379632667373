//! Partial-dependence curves: the model's mean response as one continuous
//! input sweeps over its observed range.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::net::{InputKind, Network};
use crate::panel::{build_windows_with, Normalizer, Panel, WindowOptions};

/// One grid point: the raw feature value and the mean prediction (raw
/// pickup units) with every test window's column forced to that value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdpPoint {
    pub value: f64,
    pub mean_prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdpCurve {
    pub feature: String,
    pub points: Vec<PdpPoint>,
}

/// Sweeps `feature` over `grid_points` evenly spaced raw values between
/// its observed minimum and maximum. For each value the feature column of
/// every test window is overwritten (after applying the same normalization
/// the model was trained with) and the predictions are averaged.
///
/// The curve reports raw units on both axes. Predictions are not clamped:
/// the curve describes the model's response, not a scored forecast.
pub fn partial_dependence(
    net: &Network<f64>,
    panel: &Panel,
    normalizer: &Normalizer,
    test_targets: Range<usize>,
    feature: &str,
    grid_points: usize,
) -> Result<PdpCurve> {
    if grid_points < 2 {
        return Err(Error::contract(format!(
            "partial dependence needs at least 2 grid points, got {grid_points}"
        )));
    }
    let col = net
        .config
        .inputs
        .iter()
        .position(|spec| spec.name == feature)
        .ok_or_else(|| {
            Error::contract(format!("feature '{feature}' is not an input of this network"))
        })?;
    match net.config.inputs[col].kind {
        InputKind::Continuous => {}
        InputKind::Categorical { .. } => {
            return Err(Error::contract(format!(
                "partial dependence needs a continuous feature; '{feature}' is categorical \
                 (a per-level variant is future work)"
            )));
        }
    }

    // Window layout must match the input declarations column for column.
    let include_pickups = net.config.inputs.first().is_some_and(|s| s.name == "p");
    let mut expected: Vec<&str> = Vec::new();
    if include_pickups {
        expected.push("p");
    }
    expected.extend(panel.schema.names());
    let declared: Vec<&str> = net.config.inputs.iter().map(|s| s.name.as_str()).collect();
    if expected != declared {
        return Err(Error::schema(format!(
            "network inputs {declared:?} do not match the panel columns {expected:?}"
        )));
    }

    // Observed raw range of the swept feature.
    let observed: Vec<f64> = if feature == "p" {
        panel.pickups.clone()
    } else {
        let idx = panel
            .schema
            .index_of(feature)
            .expect("validated against inputs above");
        panel.observed_values(idx)
    };
    if observed.is_empty() {
        return Err(Error::contract(format!(
            "feature '{feature}' has no observed values to span a grid"
        )));
    }
    let lo = observed.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = observed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let normalized = normalizer.apply(panel)?;
    let mut opts = WindowOptions::new(net.config.lookback).targets(test_targets);
    if !include_pickups {
        opts = opts.without_pickups();
    }
    let batch = build_windows_with(&normalized, &opts)?;
    if batch.windows.is_empty() {
        return Err(Error::contract("the test range yields no windows"));
    }

    let rows = batch.windows[0].input.shape()[0];
    let mut points = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        // The last point is pinned to `hi` so the grid spans the observed
        // range exactly despite rounding in the interpolation.
        let value = if i + 1 == grid_points {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (grid_points - 1) as f64
        };
        let forced = match feature == "p" {
            true => normalizer.apply_pickup(value),
            false => match normalizer.entry(feature) {
                Some(entry) => entry.apply(value),
                None => {
                    return Err(Error::contract(format!(
                        "normalizer has no entry for feature '{feature}'"
                    )))
                }
            },
        };
        let mut total = 0.0;
        for window in &batch.windows {
            let mut input = window.input.clone();
            for r in 0..rows {
                input.set2(r, col, forced);
            }
            let pred = net.predict(&input)?.scalar()?;
            total += normalizer.invert_pickup(pred);
        }
        points.push(PdpPoint {
            value,
            mean_prediction: total / batch.windows.len() as f64,
        });
    }

    Ok(PdpCurve {
        feature: feature.to_string(),
        points,
    })
}

//! Iterative multi-step forecasting: one-step forecasts are fed back into
//! the pickup column of later windows.

use crate::error::{Error, Result};
use crate::net::{Head, Network};
use crate::panel::{Normalizer, Panel};
use crate::tensor::Tensor;

/// A multi-step forecast plus, for inspection, the exact raw input window
/// the network saw at each step.
#[derive(Debug, Clone)]
pub struct IterativeForecast {
    pub start_slot: usize,
    /// Forecast pickups in original units, one per horizon step.
    pub values: Vec<f64>,
    /// Raw (unnormalized) input windows, step by step. From step 1 onward
    /// the pickup column of the most recent rows holds earlier forecasts
    /// rather than observations.
    pub windows: Vec<Tensor<f64>>,
}

/// Forecasts `horizon` consecutive slots starting at `start_slot`.
///
/// The panel must hold raw (unnormalized) values with no missing cells, and
/// its exogenous feature columns must extend through the whole forecast
/// range — future exogenous values are required inputs, not something this
/// function invents. Pickups beyond `start_slot` are never read: the model's
/// own (denormalized) forecasts take their place, then each assembled raw
/// window is normalized with the supplied normalizer exactly as during
/// training.
pub fn predict_iterative(
    net: &Network<f64>,
    panel: &Panel,
    normalizer: &Normalizer,
    start_slot: usize,
    horizon: usize,
) -> Result<IterativeForecast> {
    if horizon == 0 {
        return Err(Error::contract("forecast horizon must be at least 1"));
    }
    if net.config.head != Head::Regression {
        return Err(Error::contract("iterative forecasting requires the regression head"));
    }
    if panel.has_missing() {
        return Err(Error::contract("panel has missing cells; impute before forecasting"));
    }
    let s = net.config.lookback;
    if start_slot < s + 1 {
        return Err(Error::input(format!(
            "iterative forecasting from slot {start_slot} needs {} observed slots of history",
            s + 1
        )));
    }
    let end = start_slot + horizon;
    if end > panel.slots() {
        return Err(Error::input(format!(
            "iterative forecasting through slot {} requires exogenous features for every forecast slot, but the panel ends at slot {}",
            end - 1,
            panel.slots()
        )));
    }
    let expected: Vec<&str> = std::iter::once("p").chain(panel.schema.names()).collect();
    let actual: Vec<&str> = net.config.inputs.iter().map(|i| i.name.as_str()).collect();
    if expected != actual {
        return Err(Error::schema(format!(
            "network inputs {actual:?} do not match the panel columns {expected:?}"
        )));
    }

    let width = expected.len();
    let mut pickups = panel.pickups.clone();
    let mut values = Vec::with_capacity(horizon);
    let mut windows = Vec::with_capacity(horizon);
    for j in 0..horizon {
        let t = start_slot + j;
        let mut flat = Vec::with_capacity((s + 1) * width);
        for u in t - s - 1..t {
            let mut row = panel.row_values(u)?;
            if u >= start_slot {
                row[0] = pickups[u];
            }
            flat.extend_from_slice(&row);
        }
        let raw = Tensor::from_vec(&[s + 1, width], flat)?;
        let mut normalized = raw.clone();
        for u in 0..s + 1 {
            normalizer.apply_row(normalized.row_mut(u))?;
        }
        let pred_norm = net.predict(&normalized)?.scalar()?;
        let pred = normalizer.invert_pickup(pred_norm);
        if !pred.is_finite() {
            return Err(Error::numeric(format!("forecast for slot {t} is not finite")));
        }
        pickups[t] = pred;
        values.push(pred);
        windows.push(raw);
    }
    Ok(IterativeForecast { start_slot, values, windows })
}

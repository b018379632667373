//! Permutation importance: how much held-out accuracy degrades when one
//! input column is decoupled from the targets.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use super::metrics::rmse;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::net::Network;
use crate::panel::{Normalizer, WindowBatch};

/// One ranked input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceRow {
    pub feature: String,
    /// Mean `|RMSE_shuffled − RMSE_base|` over the repeats.
    pub importance: f64,
}

/// Importance table, ranked most influential first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceReport {
    pub base_rmse: f64,
    pub repeats: usize,
    pub rows: Vec<ImportanceRow>,
}

fn score(
    net: &Network<f64>,
    inputs: &[crate::tensor::Tensor<f64>],
    targets: &[f64],
    normalizer: Option<&Normalizer>,
) -> Result<f64> {
    let mut forecasts = Vec::with_capacity(inputs.len());
    for input in inputs {
        let pred = net.predict(input)?.scalar()?;
        let value = match normalizer {
            // Raw pickup units: invert the scaling and clamp at the
            // metrics boundary, exactly as the CV harness scores models.
            Some(norm) => norm.invert_pickup(pred).max(0.0),
            None => pred,
        };
        forecasts.push(value);
    }
    rmse(&forecasts, targets)
}

/// Shuffles each input column across windows (seeded, per feature and
/// repeat), rescoring the network each time. A whole window-column moves
/// at once, so within-window temporal structure is preserved while the
/// feature's alignment with the target is destroyed.
///
/// With a `normalizer` the report is in raw pickup units (forecasts
/// clamped ≥ 0); without one it is in normalized units.
pub fn permutation_importance(
    net: &Network<f64>,
    windows: &WindowBatch<f64>,
    normalizer: Option<&Normalizer>,
    seed: u64,
    repeats: usize,
) -> Result<ImportanceReport> {
    if repeats == 0 {
        return Err(Error::contract("permutation importance needs at least 1 repeat"));
    }
    if windows.windows.len() < 2 {
        return Err(Error::contract(format!(
            "permutation importance needs at least 2 windows, got {}",
            windows.windows.len()
        )));
    }
    let n_inputs = net.config.inputs.len();
    let width = windows.windows[0].input.shape()[1];
    if width != n_inputs {
        return Err(Error::size(format!(
            "windows have {width} columns but the network declares {n_inputs} inputs"
        )));
    }

    let inputs: Vec<_> = windows.windows.iter().map(|w| w.input.clone()).collect();
    let targets: Vec<f64> = windows
        .windows
        .iter()
        .map(|w| match normalizer {
            Some(norm) => norm.invert_pickup(w.target),
            None => w.target,
        })
        .collect();
    let base_rmse = score(net, &inputs, &targets, normalizer)?;

    let rows_count = inputs[0].shape()[0];
    let mut rows: Vec<ImportanceRow> = Vec::with_capacity(n_inputs);
    for (col, spec) in net.config.inputs.iter().enumerate() {
        let mut total = 0.0;
        for rep in 0..repeats {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(
                seed,
                &format!("perm:{}:{rep}", spec.name),
            ));
            let mut perm: Vec<usize> = (0..inputs.len()).collect();
            perm.shuffle(&mut rng);
            let shuffled: Vec<_> = inputs
                .iter()
                .enumerate()
                .map(|(w, input)| {
                    let mut t = input.clone();
                    let src = &inputs[perm[w]];
                    for r in 0..rows_count {
                        t.set2(r, col, src.at2(r, col));
                    }
                    t
                })
                .collect();
            let shuffled_rmse = score(net, &shuffled, &targets, normalizer)?;
            total += (shuffled_rmse - base_rmse).abs();
        }
        rows.push(ImportanceRow {
            feature: spec.name.clone(),
            importance: total / repeats as f64,
        });
    }

    rows.sort_by(|a, b| {
        b.importance
            .total_cmp(&a.importance)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(ImportanceReport {
        base_rmse,
        repeats,
        rows,
    })
}

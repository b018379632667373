//! Reference forecasters: seasonal naive, persistence, and a closed-form
//! ridge autoregression with exogenous inputs.
//!
//! These models are deliberately simple — each is exactly specified, cheap
//! to fit, and runs through the same evaluation harness as the network, so
//! they bound the comparison from below.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::panel::Panel;

/// Repeats the last observed seasonal cycle.
///
/// `prediction[h] = series[len + h - period]`, indexing into the history
/// extended by the predictions already made, so horizons beyond one period
/// recurse on the model's own output (which simply tiles the final cycle).
pub fn seasonal_naive(history: &[f64], period: usize, horizon: usize) -> Result<Vec<f64>> {
    if period == 0 {
        return Err(Error::contract("seasonal period must be at least 1"));
    }
    if history.len() < period {
        return Err(Error::contract(format!(
            "seasonal naive needs at least {period} observations, got {}",
            history.len()
        )));
    }
    let n = history.len();
    let mut out: Vec<f64> = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let idx = n + h - period;
        let v = if idx < n { history[idx] } else { out[idx - n] };
        out.push(v);
    }
    Ok(out)
}

/// Repeats the last observed value over the whole horizon.
pub fn persistence(history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let last = *history
        .last()
        .ok_or_else(|| Error::contract("persistence needs at least one observation"))?;
    Ok(vec![last; horizon])
}

/// Fitted ridge autoregression with exogenous inputs.
///
/// The prediction for slot `t` is
/// `intercept + Σ_j coef[j]·p(t-1-j) + Σ_e coef[p_lags+e]·x_e(t)`,
/// with coefficients solving the penalized normal equations
/// `(XᵀX + αI')β = Xᵀy` exactly (the intercept is not penalized).
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeArxParams {
    pub p_lags: usize,
    /// Names of the exogenous feature columns, in design-matrix order.
    pub exogenous: Vec<String>,
    pub alpha: f64,
    /// Lag coefficients first (most recent lag first), then one per
    /// exogenous feature.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

fn exog_indices(panel: &Panel, exogenous: &[String]) -> Result<Vec<usize>> {
    exogenous
        .iter()
        .map(|name| {
            panel
                .schema
                .index_of(name)
                .ok_or_else(|| Error::schema(format!("unknown exogenous feature '{name}'")))
        })
        .collect()
}

/// Solves `A x = b` in place by Gaussian elimination with partial pivoting.
/// `A` is row-major `n × n`.
fn solve_linear(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty pivot range");
        if a[pivot_row][col].abs() < 1e-12 {
            return Err(Error::numeric(
                "normal equations are singular; set a ridge strength α > 0 to regularize",
            ));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Fits the ridge ARX model on panel slots `train` (half-open).
///
/// Design rows are the targets `t` in `train.start + p_lags .. train.end`;
/// each row holds the `p_lags` preceding pickup counts and the exogenous
/// feature values at `t` itself, plus an unpenalized intercept column.
pub fn fit_ridge_arx(
    panel: &Panel,
    train: Range<usize>,
    p_lags: usize,
    exogenous: &[String],
    alpha: f64,
) -> Result<RidgeArxParams> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::contract(format!(
            "ridge strength must be finite and non-negative, got {alpha}"
        )));
    }
    if train.end > panel.slots() || train.start >= train.end {
        return Err(Error::range(format!(
            "train range {}..{} invalid for a panel of {} slots",
            train.start,
            train.end,
            panel.slots()
        )));
    }
    if panel.has_missing() {
        return Err(Error::contract(
            "ridge ARX needs a complete panel; impute missing cells first",
        ));
    }
    let exog_idx = exog_indices(panel, exogenous)?;
    let n_params = p_lags + exog_idx.len();
    let train_rows = train.end - train.start;
    if train_rows < n_params + 1 {
        return Err(Error::contract(format!(
            "ridge ARX with {p_lags} lags and {} exogenous features needs at least {} train rows, got {train_rows}",
            exog_idx.len(),
            n_params + 1
        )));
    }

    // Design matrix with the intercept as the last column.
    let width = n_params + 1;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for t in train.start + p_lags..train.end {
        let mut row = Vec::with_capacity(width);
        for j in 0..p_lags {
            row.push(panel.pickups[t - 1 - j]);
        }
        for &e in &exog_idx {
            row.push(panel.features[e][t]);
        }
        row.push(1.0);
        rows.push(row);
        ys.push(panel.pickups[t]);
    }

    // Normal equations XᵀX + αI' (no penalty on the intercept) and Xᵀy.
    let mut ata = vec![vec![0.0; width]; width];
    let mut aty = vec![0.0; width];
    for (row, y) in rows.iter().zip(&ys) {
        for i in 0..width {
            for j in 0..width {
                ata[i][j] += row[i] * row[j];
            }
            aty[i] += row[i] * y;
        }
    }
    for (i, row) in ata.iter_mut().enumerate().take(n_params) {
        row[i] += alpha;
    }

    let beta = solve_linear(&mut ata, &mut aty)?;
    Ok(RidgeArxParams {
        p_lags,
        exogenous: exogenous.to_vec(),
        alpha,
        coefficients: beta[..n_params].to_vec(),
        intercept: beta[n_params],
    })
}

/// One-step prediction for `target_slot` from observed history and the
/// slot's own exogenous values.
pub fn predict_ridge_arx(params: &RidgeArxParams, panel: &Panel, target_slot: usize) -> Result<f64> {
    if target_slot < params.p_lags {
        return Err(Error::input(format!(
            "target slot {target_slot} has fewer than {} prior observations",
            params.p_lags
        )));
    }
    if target_slot >= panel.slots() {
        return Err(Error::range(format!(
            "target slot {target_slot} outside panel of {} slots",
            panel.slots()
        )));
    }
    let exog_idx = exog_indices(panel, &params.exogenous)?;
    let mut acc = params.intercept;
    for j in 0..params.p_lags {
        acc += params.coefficients[j] * panel.pickups[target_slot - 1 - j];
    }
    for (k, &e) in exog_idx.iter().enumerate() {
        acc += params.coefficients[params.p_lags + k] * panel.features[e][target_slot];
    }
    Ok(acc)
}

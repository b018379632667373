//! Point-forecast accuracy metrics.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_lengths<S>(forecast: &[S], actual: &[S]) -> Result<()> {
    if forecast.len() != actual.len() {
        return Err(Error::size(format!(
            "forecast has {} values but actual has {}",
            forecast.len(),
            actual.len()
        )));
    }
    if forecast.is_empty() {
        return Err(Error::contract("metrics need at least one observation"));
    }
    Ok(())
}

/// Root mean squared error: `sqrt(mean((forecast - actual)^2))`.
pub fn rmse<S: Scalar>(forecast: &[S], actual: &[S]) -> Result<S> {
    check_lengths(forecast, actual)?;
    let n = S::of(forecast.len() as f64);
    let ss: S = forecast
        .iter()
        .zip(actual)
        .map(|(f, a)| (*f - *a) * (*f - *a))
        .sum();
    Ok((ss / n).sqrt())
}

/// Symmetric mean absolute percentage error, reported in percent.
///
/// Each term is `|f - a| / ((f + a) / 2)`; a term with `f + a == 0` (both
/// values zero) contributes zero. The mean of the terms is scaled by 100,
/// so the result lives in `[0, 200]`. Values must be non-negative — pickup
/// counts are, and the denominator convention relies on it.
pub fn smape<S: Scalar>(forecast: &[S], actual: &[S]) -> Result<S> {
    check_lengths(forecast, actual)?;
    let mut total = S::zero();
    for (f, a) in forecast.iter().zip(actual) {
        if *f < S::zero() || *a < S::zero() {
            return Err(Error::contract(format!(
                "smape requires non-negative values, got forecast {f} actual {a}"
            )));
        }
        let denom = (*f + *a) / S::of(2.0);
        if denom > S::zero() {
            total += (*f - *a).abs() / denom;
        }
    }
    let n = S::of(forecast.len() as f64);
    Ok(total / n * S::of(100.0))
}

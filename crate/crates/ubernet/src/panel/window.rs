//! Sliding lookback windows and chronological splits.

use chrono::NaiveDateTime;

use super::Panel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// One supervised example: `s + 1` consecutive past rows as input and the
/// next slot's pickup count as target.
///
/// Row order inside `input` is chronological; columns are pickups first,
/// then features in schema order (unless the pickups column was excluded).
/// `synthetic_history` marks windows whose pickup cells contain model
/// outputs rather than observations — inference builds those, training must
/// never see one.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<S = f64> {
    pub input: Tensor<S>,
    pub target: S,
    pub target_slot: usize,
    pub target_time: NaiveDateTime,
    pub synthetic_history: bool,
}

/// Windows sharing one lookback length and column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch<S = f64> {
    pub lookback: usize,
    pub includes_pickups: bool,
    pub windows: Vec<Window<S>>,
}

impl<S: Scalar> WindowBatch<S> {
    /// Converts element type (e.g. to feed an `f32` network).
    pub fn cast<T: Scalar>(&self) -> WindowBatch<T> {
        WindowBatch {
            lookback: self.lookback,
            includes_pickups: self.includes_pickups,
            windows: self
                .windows
                .iter()
                .map(|w| Window {
                    input: w.input.cast(),
                    target: T::of(w.target.to64()),
                    target_slot: w.target_slot,
                    target_time: w.target_time,
                    synthetic_history: w.synthetic_history,
                })
                .collect(),
        }
    }
}

/// Options for window construction.
#[derive(Debug, Clone)]
pub struct WindowOptions {
    /// Lookback length `s`: each input holds `s + 1` rows.
    pub lookback: usize,
    /// Whether the pickups column is part of the input (it always remains
    /// the target).
    pub include_pickups: bool,
    /// Target slots to keep, as a half-open slot range; `None` keeps every
    /// feasible target.
    pub targets: Option<std::ops::Range<usize>>,
}

impl WindowOptions {
    pub fn new(lookback: usize) -> WindowOptions {
        WindowOptions {
            lookback,
            include_pickups: true,
            targets: None,
        }
    }

    pub fn without_pickups(mut self) -> WindowOptions {
        self.include_pickups = false;
        self
    }

    pub fn targets(mut self, range: std::ops::Range<usize>) -> WindowOptions {
        self.targets = Some(range);
        self
    }
}

/// Builds every feasible window: target slot `j` ranges over
/// `[s + 1, slots)`, so a panel of `n` rows yields `n - s - 1` windows
/// (none when `n <= s + 1`). The input for target `j` is rows
/// `j - s - 1 ..= j - 1`. Panels with missing cells are rejected.
pub fn build_windows(panel: &Panel, lookback: usize) -> Result<WindowBatch<f64>> {
    build_windows_with(panel, &WindowOptions::new(lookback))
}

pub fn build_windows_with(panel: &Panel, opts: &WindowOptions) -> Result<WindowBatch<f64>> {
    let s = opts.lookback;
    let slots = panel.slots();
    if panel.has_missing() {
        return Err(Error::contract(format!(
            "cannot build windows: panel has {} missing cells; impute first",
            panel.missing_count()
        )));
    }
    let first_target = s + 1;
    let (lo, hi) = match &opts.targets {
        Some(r) => {
            if r.end > slots {
                return Err(Error::range(format!(
                    "target range {}..{} outside panel of {slots} slots",
                    r.start, r.end
                )));
            }
            if r.start < first_target {
                return Err(Error::range(format!(
                    "target range starts at {} but the earliest feasible target is {first_target}",
                    r.start
                )));
            }
            (r.start, r.end)
        }
        None => (first_target.min(slots), slots),
    };

    let width = if opts.include_pickups {
        1 + panel.n_features()
    } else {
        panel.n_features()
    };
    let mut windows = Vec::with_capacity(hi.saturating_sub(lo));
    for j in lo..hi {
        let mut input = Tensor::zeros(&[s + 1, width]);
        for (r, slot) in (j - s - 1..j).enumerate() {
            let mut c = 0;
            if opts.include_pickups {
                input.set2(r, c, panel.pickups[slot]);
                c += 1;
            }
            for col in &panel.features {
                input.set2(r, c, col[slot]);
                c += 1;
            }
        }
        windows.push(Window {
            input,
            target: panel.pickups[j],
            target_slot: j,
            target_time: panel.grid.slot_start(j),
            synthetic_history: false,
        });
    }
    Ok(WindowBatch {
        lookback: s,
        includes_pickups: opts.include_pickups,
        windows,
    })
}

/// Splits a panel chronologically at a slot boundary: the first panel
/// covers `[start, split)`, the second `[split, end)`. Either side may be
/// empty.
pub fn train_test_split(panel: &Panel, split: NaiveDateTime) -> Result<(Panel, Panel)> {
    let at = panel.slot_at_boundary(split)?;
    Ok((panel.slice(0, at)?, panel.slice(at, panel.slots())?))
}

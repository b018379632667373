//! Expanding-window fold plans for rolling cross-validation.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::panel::TimeGrid;

/// One train/test split over slot indices. The test block always starts
/// exactly where the train range ends, so every training slot strictly
/// precedes every test slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// Time-ordered folds with disjoint, equally sized, contiguous test blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    /// First slot not covered by any fold's test block.
    pub fn test_start(&self) -> usize {
        self.folds.first().map_or(0, |f| f.test.start)
    }

    /// One past the last test slot.
    pub fn test_end(&self) -> usize {
        self.folds.last().map_or(0, |f| f.test.end)
    }
}

/// Lays out `folds` expanding-window splits over the grid.
///
/// The first `min_train_fraction` of slots (rounded up) is reserved as the
/// smallest training set; the remaining slots are split into `folds` equal
/// contiguous test blocks, with any indivisible remainder folded back into
/// the reserved training prefix (so the realized training fraction never
/// drops below the requested minimum). Fold `i` trains on every slot before
/// its test block.
pub fn make_fold_plan(grid: &TimeGrid, folds: usize, min_train_fraction: f64) -> Result<FoldPlan> {
    let slots = grid.slots();
    if folds < 2 {
        return Err(Error::plan(format!("need at least 2 folds, got {folds}")));
    }
    if !(min_train_fraction.is_finite() && min_train_fraction > 0.0 && min_train_fraction < 1.0) {
        return Err(Error::plan(format!(
            "min train fraction must lie strictly between 0 and 1, got {min_train_fraction}"
        )));
    }
    let reserve_floor = (slots as f64 * min_train_fraction).ceil() as usize;
    let spare = slots.saturating_sub(reserve_floor);
    let block = spare / folds;
    if block == 0 {
        return Err(Error::plan(format!(
            "{slots} slots cannot hold a {min_train_fraction:.2} training fraction plus {folds} non-empty test blocks"
        )));
    }
    let reserve = slots - block * folds;
    let plan = FoldPlan {
        folds: (0..folds)
            .map(|i| {
                let start = reserve + i * block;
                Fold {
                    train: 0..start,
                    test: start..start + block,
                }
            })
            .collect(),
    };
    debug_assert!(plan.folds.iter().all(|f| f.train.end == f.test.start));
    debug_assert_eq!(plan.test_end(), slots);
    Ok(plan)
}

//! Z-score normalization fitted on the training range only.

use serde::{Deserialize, Serialize};

use super::schema::Kind;
use super::Panel;
use crate::error::{Error, Result};

/// Relative tolerance below which a feature's spread counts as zero.
const CONSTANT_STD_TOL: f64 = 1e-12;

/// Scaling parameters for one panel column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    /// False for categorical columns and constant columns, which pass
    /// through untouched.
    pub standardize: bool,
    /// True when the column had zero variance on the training range.
    pub constant: bool,
}

impl NormEntry {
    fn passthrough(name: &str, constant: bool) -> NormEntry {
        NormEntry {
            name: name.to_string(),
            mean: 0.0,
            std: 1.0,
            standardize: false,
            constant,
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        if self.standardize {
            (v - self.mean) / self.std
        } else {
            v
        }
    }

    pub fn invert(&self, v: f64) -> f64 {
        if self.standardize {
            v * self.std + self.mean
        } else {
            v
        }
    }
}

/// Per-column z-score transform. Column order matches window order:
/// pickups first, then schema features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub entries: Vec<NormEntry>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Fits per-column mean and population standard deviation on slots
/// `train` of the panel. Categorical columns and columns constant on the
/// training range become passthrough entries.
pub fn fit_normalizer(panel: &Panel, train: std::ops::Range<usize>) -> Result<Normalizer> {
    if train.start >= train.end || train.end > panel.slots() {
        return Err(Error::contract(format!(
            "normalizer training range {}..{} invalid for panel of {} slots",
            train.start,
            train.end,
            panel.slots()
        )));
    }
    for (fi, col) in panel.missing.iter().enumerate() {
        if col[train.clone()].iter().any(|m| *m) {
            return Err(Error::contract(format!(
                "cannot fit normalizer: feature '{}' has missing values in the training range",
                panel.schema.features()[fi].name
            )));
        }
    }

    let mut entries = Vec::with_capacity(1 + panel.n_features());
    let fit_column = |name: &str, values: &[f64]| -> NormEntry {
        let (mean, std) = mean_std(values);
        if std <= CONSTANT_STD_TOL * (1.0 + mean.abs()) {
            NormEntry::passthrough(name, true)
        } else {
            NormEntry {
                name: name.to_string(),
                mean,
                std,
                standardize: true,
                constant: false,
            }
        }
    };

    entries.push(fit_column("p", &panel.pickups[train.clone()]));
    for (fi, def) in panel.schema.features().iter().enumerate() {
        if def.kind == Kind::Categorical {
            entries.push(NormEntry::passthrough(&def.name, false));
        } else {
            entries.push(fit_column(&def.name, &panel.features[fi][train.clone()]));
        }
    }
    Ok(Normalizer { entries })
}

impl Normalizer {
    /// Number of columns covered (pickups plus features).
    pub fn width(&self) -> usize {
        self.entries.len()
    }

    fn check_panel(&self, panel: &Panel) -> Result<()> {
        if panel.n_features() + 1 != self.entries.len() {
            return Err(Error::size(format!(
                "normalizer covers {} columns but panel has {}",
                self.entries.len(),
                panel.n_features() + 1
            )));
        }
        for (entry, def) in self.entries[1..].iter().zip(panel.schema.features()) {
            if entry.name != def.name {
                return Err(Error::schema(format!(
                    "normalizer column '{}' does not match panel feature '{}'",
                    entry.name, def.name
                )));
            }
        }
        Ok(())
    }

    /// Returns the panel with every standardized column transformed.
    /// Requires a complete (imputed) panel.
    pub fn apply(&self, panel: &Panel) -> Result<Panel> {
        self.check_panel(panel)?;
        if panel.has_missing() {
            return Err(Error::contract(
                "cannot normalize a panel with missing cells; impute first",
            ));
        }
        let mut out = panel.clone();
        // Standardized pickups can go negative; skip panel validation's
        // non-negativity by transforming a copy directly.
        for v in &mut out.pickups {
            *v = self.entries[0].apply(*v);
        }
        for (fi, col) in out.features.iter_mut().enumerate() {
            let entry = &self.entries[fi + 1];
            for v in col.iter_mut() {
                *v = entry.apply(*v);
            }
        }
        Ok(out)
    }

    /// Normalizes one raw row (window column order) in place.
    pub fn apply_row(&self, row: &mut [f64]) -> Result<()> {
        if row.len() != self.entries.len() {
            return Err(Error::size(format!(
                "row has {} columns, normalizer covers {}",
                row.len(),
                self.entries.len()
            )));
        }
        for (v, entry) in row.iter_mut().zip(&self.entries) {
            *v = entry.apply(*v);
        }
        Ok(())
    }

    pub fn apply_pickup(&self, v: f64) -> f64 {
        self.entries[0].apply(v)
    }

    pub fn invert_pickup(&self, v: f64) -> f64 {
        self.entries[0].invert(v)
    }

    /// Entry for a named column, if covered.
    pub fn entry(&self, name: &str) -> Option<&NormEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

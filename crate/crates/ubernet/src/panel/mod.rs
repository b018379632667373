//! Panel construction: events → regular time-slot matrix of pickups and
//! joined features, plus normalization, windowing, and a synthetic
//! generator.

pub mod events;
pub mod grid;
pub mod impute;
pub mod io;
pub mod join;
pub mod normalize;
pub mod schema;
pub mod synth;
pub mod window;

use std::collections::BTreeMap;

use chrono::NaiveDateTime;

pub use events::{aggregate_counts, parse_events, read_events, Aggregation, Event};
pub use grid::TimeGrid;
pub use impute::{impute_missing, read_adjacency, Adjacency, ImputeReport};
pub use io::{mask_path_for, read_panel, write_panel};
pub use join::{join_features, read_feature_table, FeatureTable};
pub use normalize::{fit_normalizer, NormEntry, Normalizer};
pub use schema::{canonical_schema, read_schema, write_schema, FeatureDef, FeatureSchema, Kind, SetTag, Spatial};
pub use synth::{synth_panel, DriverSpec, SynthConfig};
pub use window::{build_windows, build_windows_with, train_test_split, Window, WindowBatch, WindowOptions};

use crate::error::{Error, Result};

/// Which pickups a panel aggregates: every region, or one named region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegionScope {
    Global,
    Region(String),
}

impl RegionScope {
    pub fn label(&self) -> &str {
        match self {
            RegionScope::Global => "all",
            RegionScope::Region(name) => name,
        }
    }
}

/// Per-region pickup counts inside one slot, sorted by region name.
pub type SlotRegions = Vec<(String, u32)>;

/// A regular multivariate time series: one row per grid slot, a pickup
/// count column, and one column per schema feature.
///
/// `features` and `missing` are column-major (`[feature][slot]`). Cells
/// flagged in `missing` hold an unspecified value and must be imputed
/// before normalization or windowing.
///
/// `slot_regions` preserves which regions produced each slot's pickups so
/// spatial joins and imputation can weight by pickup share; `region_values`
/// retains the per-region feature values for spatially joined features so
/// imputation can consult neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub grid: TimeGrid,
    pub scope: RegionScope,
    pub schema: FeatureSchema,
    pub pickups: Vec<f64>,
    pub features: Vec<Vec<f64>>,
    pub missing: Vec<Vec<bool>>,
    pub slot_regions: Vec<SlotRegions>,
    pub region_values: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Panel {
    /// Feature-less panel from aggregated counts.
    pub fn from_counts(
        grid: TimeGrid,
        scope: RegionScope,
        pickups: Vec<f64>,
        slot_regions: Vec<SlotRegions>,
    ) -> Result<Panel> {
        let panel = Panel {
            grid,
            scope,
            schema: FeatureSchema::empty(),
            pickups,
            features: vec![],
            missing: vec![],
            slot_regions,
            region_values: BTreeMap::new(),
        };
        panel.validate()?;
        Ok(panel)
    }

    /// Structural invariants: column lengths equal the slot count, shapes
    /// agree with the schema, pickups non-negative.
    pub fn validate(&self) -> Result<()> {
        let slots = self.grid.slots();
        if self.pickups.len() != slots {
            return Err(Error::size(format!(
                "panel has {} pickup rows for {} slots",
                self.pickups.len(),
                slots
            )));
        }
        if self.features.len() != self.schema.len() || self.missing.len() != self.schema.len() {
            return Err(Error::size(format!(
                "panel has {} feature columns and {} mask columns for a {}-feature schema",
                self.features.len(),
                self.missing.len(),
                self.schema.len()
            )));
        }
        for (i, col) in self.features.iter().enumerate() {
            if col.len() != slots {
                return Err(Error::size(format!(
                    "feature column '{}' has {} rows for {} slots",
                    self.schema.features()[i].name,
                    col.len(),
                    slots
                )));
            }
        }
        for (i, col) in self.missing.iter().enumerate() {
            if col.len() != slots {
                return Err(Error::size(format!(
                    "mask column '{}' has {} rows for {} slots",
                    self.schema.features()[i].name,
                    col.len(),
                    slots
                )));
            }
        }
        if !self.slot_regions.is_empty() && self.slot_regions.len() != slots {
            return Err(Error::size(format!(
                "panel has {} slot-region entries for {} slots",
                self.slot_regions.len(),
                slots
            )));
        }
        for (i, p) in self.pickups.iter().enumerate() {
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::range(format!(
                    "pickup count {p} at slot {i} must be a finite non-negative number"
                )));
            }
        }
        Ok(())
    }

    pub fn slots(&self) -> usize {
        self.grid.slots()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|col| col.iter().any(|m| *m))
    }

    pub fn missing_count(&self) -> usize {
        self.missing
            .iter()
            .map(|col| col.iter().filter(|m| **m).count())
            .sum()
    }

    /// Values of one row in window column order: pickups first, then
    /// features in schema order. Requires the row to be fully observed.
    pub fn row_values(&self, slot: usize) -> Result<Vec<f64>> {
        if slot >= self.slots() {
            return Err(Error::range(format!(
                "slot {slot} outside panel of {} slots",
                self.slots()
            )));
        }
        let mut row = Vec::with_capacity(1 + self.n_features());
        row.push(self.pickups[slot]);
        for (f, col) in self.features.iter().enumerate() {
            if self.missing[f][slot] {
                return Err(Error::contract(format!(
                    "slot {slot} has a missing value for feature '{}'",
                    self.schema.features()[f].name
                )));
            }
            row.push(col[slot]);
        }
        Ok(row)
    }

    /// Panel restricted to slots `[from, to)`. Region-level metadata is
    /// carried over unchanged.
    pub fn slice(&self, from: usize, to: usize) -> Result<Panel> {
        let grid = self.grid.slice(from, to)?;
        Ok(Panel {
            grid,
            scope: self.scope.clone(),
            schema: self.schema.clone(),
            pickups: self.pickups[from..to].to_vec(),
            features: self
                .features
                .iter()
                .map(|col| col[from..to].to_vec())
                .collect(),
            missing: self
                .missing
                .iter()
                .map(|col| col[from..to].to_vec())
                .collect(),
            slot_regions: if self.slot_regions.is_empty() {
                vec![]
            } else {
                self.slot_regions[from..to].to_vec()
            },
            region_values: self.region_values.clone(),
        })
    }

    /// Panel keeping only the named features (order given by `names`).
    pub fn with_features(&self, names: &[&str]) -> Result<Panel> {
        let mut defs = Vec::with_capacity(names.len());
        let mut features = Vec::with_capacity(names.len());
        let mut missing = Vec::with_capacity(names.len());
        for name in names {
            let idx = self.schema.index_of(name).ok_or_else(|| {
                Error::schema(format!("panel has no feature named '{name}'"))
            })?;
            defs.push(self.schema.features()[idx].clone());
            features.push(self.features[idx].clone());
            missing.push(self.missing[idx].clone());
        }
        Ok(Panel {
            grid: self.grid.clone(),
            scope: self.scope.clone(),
            schema: FeatureSchema::new(defs)?,
            pickups: self.pickups.clone(),
            features,
            missing,
            slot_regions: self.slot_regions.clone(),
            region_values: self.region_values.clone(),
        })
    }

    /// Panel keeping features whose set tag is in `sets` (schema order).
    pub fn with_feature_sets(&self, sets: &[SetTag]) -> Result<Panel> {
        let sub = self.schema.subset_by_sets(sets);
        let names = sub.names();
        self.with_features(&names)
    }

    /// Panel without the named feature.
    pub fn without_feature(&self, name: &str) -> Result<Panel> {
        if self.schema.index_of(name).is_none() {
            return Err(Error::schema(format!(
                "panel has no feature named '{name}'"
            )));
        }
        let keep = self.schema.without(name);
        self.with_features(&keep.names())
    }

    /// Observed (non-missing) values of one feature column.
    pub fn observed_values(&self, feature_idx: usize) -> Vec<f64> {
        self.features[feature_idx]
            .iter()
            .zip(&self.missing[feature_idx])
            .filter(|(_, m)| !**m)
            .map(|(v, _)| *v)
            .collect()
    }

    /// Slot index of the first slot at/after `t`, requiring alignment to a
    /// slot boundary (used to turn split dates into slot indices).
    pub fn slot_at_boundary(&self, t: NaiveDateTime) -> Result<usize> {
        if t == self.grid.end() {
            return Ok(self.slots());
        }
        match self.grid.slot_of(t) {
            Some(i) if self.grid.slot_start(i) == t => Ok(i),
            Some(_) => Err(Error::range(format!(
                "timestamp {t} does not fall on a slot boundary"
            ))),
            None => Err(Error::range(format!(
                "timestamp {t} outside panel span {} .. {}",
                self.grid.start(),
                self.grid.end()
            ))),
        }
    }
}

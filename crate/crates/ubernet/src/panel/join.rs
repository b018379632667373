//! Joining exogenous feature tables onto the pickup panel.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDateTime;

use super::events::parse_datetime;
use super::schema::{FeatureSchema, Kind, Spatial};
use super::Panel;
use crate::error::{Error, Result};

/// A parsed feature source file.
///
/// Time-keyed tables (`datetime,<col>,...`) hold readings that are averaged
/// into the slot containing their timestamp. Region-keyed tables
/// (`region,<col>,...`) hold static per-region values joined through each
/// slot's pickup regions. Empty cells mean "no value here".
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureTable {
    TimeKeyed {
        source: String,
        columns: Vec<String>,
        rows: Vec<(NaiveDateTime, Vec<Option<f64>>)>,
    },
    RegionKeyed {
        source: String,
        columns: Vec<String>,
        rows: Vec<(String, Vec<Option<f64>>)>,
    },
}

impl FeatureTable {
    pub fn source(&self) -> &str {
        match self {
            FeatureTable::TimeKeyed { source, .. } => source,
            FeatureTable::RegionKeyed { source, .. } => source,
        }
    }

    pub fn columns(&self) -> &[String] {
        match self {
            FeatureTable::TimeKeyed { columns, .. } => columns,
            FeatureTable::RegionKeyed { columns, .. } => columns,
        }
    }
}

fn parse_cell(raw: &str, file: &str, line: u64, col: &str) -> Result<Option<f64>> {
    let t = raw.trim();
    if t.is_empty() {
        return Ok(None);
    }
    t.parse::<f64>().map(Some).map_err(|_| {
        Error::parse(
            file,
            line,
            format!("column '{col}': unparseable number '{t}'"),
        )
    })
}

/// Parses a feature table; the first header field decides the table kind.
pub fn parse_feature_table(text: &str, file_label: &str) -> Result<FeatureTable> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h.trim_end_matches('\r').trim(),
        None => {
            return Err(Error::schema(format!(
                "{file_label}: empty feature table"
            )))
        }
    };
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.len() < 2 {
        return Err(Error::schema(format!(
            "{file_label}: feature table needs a key column plus at least one value column"
        )));
    }
    let key = fields[0];
    let columns: Vec<String> = fields[1..].iter().map(|s| s.to_string()).collect();
    match key {
        "datetime" => {
            let mut rows = Vec::new();
            for (idx, raw) in lines {
                let line_no = idx as u64 + 1;
                let line = raw.trim_end_matches('\r');
                if line.trim().is_empty() {
                    continue;
                }
                let parts: Vec<&str> = line.split(',').collect();
                if parts.len() != columns.len() + 1 {
                    return Err(Error::parse(
                        file_label,
                        line_no,
                        format!("expected {} fields, got {}", columns.len() + 1, parts.len()),
                    ));
                }
                let ts = parse_datetime(parts[0]).ok_or_else(|| {
                    Error::parse(
                        file_label,
                        line_no,
                        format!("unparseable timestamp '{}'", parts[0].trim()),
                    )
                })?;
                let mut cells = Vec::with_capacity(columns.len());
                for (ci, raw_cell) in parts[1..].iter().enumerate() {
                    cells.push(parse_cell(raw_cell, file_label, line_no, &columns[ci])?);
                }
                rows.push((ts, cells));
            }
            Ok(FeatureTable::TimeKeyed {
                source: file_label.to_string(),
                columns,
                rows,
            })
        }
        "region" => {
            let mut rows = Vec::new();
            let mut seen = std::collections::BTreeSet::new();
            for (idx, raw) in lines {
                let line_no = idx as u64 + 1;
                let line = raw.trim_end_matches('\r');
                if line.trim().is_empty() {
                    continue;
                }
                let parts: Vec<&str> = line.split(',').collect();
                if parts.len() != columns.len() + 1 {
                    return Err(Error::parse(
                        file_label,
                        line_no,
                        format!("expected {} fields, got {}", columns.len() + 1, parts.len()),
                    ));
                }
                let region = parts[0].trim().to_string();
                if region.is_empty() {
                    return Err(Error::parse(file_label, line_no, "empty region"));
                }
                if !seen.insert(region.clone()) {
                    return Err(Error::parse(
                        file_label,
                        line_no,
                        format!("duplicate region '{region}'"),
                    ));
                }
                let mut cells = Vec::with_capacity(columns.len());
                for (ci, raw_cell) in parts[1..].iter().enumerate() {
                    cells.push(parse_cell(raw_cell, file_label, line_no, &columns[ci])?);
                }
                rows.push((region, cells));
            }
            Ok(FeatureTable::RegionKeyed {
                source: file_label.to_string(),
                columns,
                rows,
            })
        }
        other => Err(Error::schema(format!(
            "{file_label}: first column must be 'datetime' or 'region', got '{other}'"
        ))),
    }
}

pub fn read_feature_table(path: &Path) -> Result<FeatureTable> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_feature_table(&text, &path.display().to_string())
}

/// Pickup-weighted mean of per-region values over one slot's region mix.
/// Regions without a value are skipped; if every pickup-weight is zero the
/// valued regions are averaged evenly. `None` when no region has a value.
fn weighted_region_mean(
    slot_regions: &[(String, u32)],
    values: &BTreeMap<String, f64>,
) -> Option<f64> {
    let mut wsum = 0.0;
    let mut acc = 0.0;
    let mut n = 0usize;
    let mut plain = 0.0;
    for (region, count) in slot_regions {
        if let Some(v) = values.get(region) {
            wsum += *count as f64;
            acc += *count as f64 * v;
            plain += v;
            n += 1;
        }
    }
    if n == 0 {
        None
    } else if wsum > 0.0 {
        Some(acc / wsum)
    } else {
        Some(plain / n as f64)
    }
}

/// Pickup-weighted majority code over one slot's region mix; ties resolve
/// to the smallest code. Used for categorical spatial features, where
/// averaging codes would fabricate meaningless fractional categories.
fn weighted_region_majority(
    slot_regions: &[(String, u32)],
    values: &BTreeMap<String, f64>,
) -> Option<f64> {
    let mut tally: Vec<(f64, f64)> = Vec::new(); // (code, weight)
    let all_zero = slot_regions
        .iter()
        .filter(|(r, _)| values.contains_key(r))
        .all(|(_, c)| *c == 0);
    for (region, count) in slot_regions {
        if let Some(code) = values.get(region) {
            let w = if all_zero { 1.0 } else { *count as f64 };
            match tally.iter_mut().find(|(c, _)| c == code) {
                Some(entry) => entry.1 += w,
                None => tally.push((*code, w)),
            }
        }
    }
    tally
        .into_iter()
        .max_by(|a, b| {
            // Highest weight wins; on equal weight the smaller code wins.
            a.1.partial_cmp(&b.1)
                .unwrap()
                .then(b.0.partial_cmp(&a.0).unwrap())
        })
        .map(|(code, _)| code)
}

pub(crate) fn fill_spatial_cell(
    kind: Kind,
    slot_regions: &[(String, u32)],
    values: &BTreeMap<String, f64>,
) -> Option<f64> {
    match kind {
        Kind::Continuous => weighted_region_mean(slot_regions, values),
        Kind::Categorical => weighted_region_majority(slot_regions, values),
    }
}

/// Joins feature tables onto a panel, producing one column per schema
/// feature.
///
/// Space-independent features come from time-keyed tables: readings inside
/// a slot are averaged, slots with no reading are marked missing.
/// Space-dependent features come from region-keyed tables: each slot gets
/// the pickup-weighted mean (continuous) or majority (categorical) over its
/// pickup regions, and slots whose regions all lack values — or that had no
/// pickups under a global scope — are marked missing. Every schema feature
/// must be provided by exactly one table.
pub fn join_features(
    panel: &Panel,
    tables: &[FeatureTable],
    schema: &FeatureSchema,
) -> Result<Panel> {
    let slots = panel.slots();
    let mut features: Vec<Vec<f64>> = Vec::with_capacity(schema.len());
    let mut missing: Vec<Vec<bool>> = Vec::with_capacity(schema.len());
    let mut region_values: BTreeMap<String, BTreeMap<String, f64>> = panel.region_values.clone();

    for def in schema.features() {
        let mut owners: Vec<&FeatureTable> = tables
            .iter()
            .filter(|t| t.columns().iter().any(|c| c == &def.name))
            .collect();
        if owners.len() > 1 {
            let sources: Vec<&str> = owners.iter().map(|t| t.source()).collect();
            return Err(Error::schema(format!(
                "feature '{}' appears in multiple tables: {}",
                def.name,
                sources.join(", ")
            )));
        }
        let owner = owners.pop().ok_or_else(|| {
            Error::schema(format!("feature '{}' not found in any table", def.name))
        })?;

        let mut col = vec![0.0f64; slots];
        let mut mask = vec![true; slots];
        match (def.spatial, owner) {
            (Spatial::SpaceIndependent, FeatureTable::TimeKeyed { columns, rows, .. }) => {
                let ci = columns.iter().position(|c| c == &def.name).unwrap();
                let mut sums = vec![0.0f64; slots];
                let mut counts = vec![0usize; slots];
                for (ts, cells) in rows {
                    if let (Some(slot), Some(v)) = (panel.grid.slot_of(*ts), cells[ci]) {
                        sums[slot] += v;
                        counts[slot] += 1;
                    }
                }
                for i in 0..slots {
                    if counts[i] > 0 {
                        col[i] = sums[i] / counts[i] as f64;
                        mask[i] = false;
                    }
                }
            }
            (Spatial::SpaceDependent, FeatureTable::RegionKeyed { columns, rows, .. }) => {
                let ci = columns.iter().position(|c| c == &def.name).unwrap();
                let mut values: BTreeMap<String, f64> = BTreeMap::new();
                for (region, cells) in rows {
                    if let Some(v) = cells[ci] {
                        values.insert(region.clone(), v);
                    }
                }
                for i in 0..slots {
                    let regions: &[(String, u32)] = panel
                        .slot_regions
                        .get(i)
                        .map(|v| v.as_slice())
                        .unwrap_or(&[]);
                    if let Some(v) = fill_spatial_cell(def.kind, regions, &values) {
                        col[i] = v;
                        mask[i] = false;
                    }
                }
                region_values.insert(def.name.clone(), values);
            }
            (Spatial::SpaceIndependent, FeatureTable::RegionKeyed { source, .. }) => {
                return Err(Error::schema(format!(
                    "space-independent feature '{}' found only in region-keyed table {source}",
                    def.name
                )));
            }
            (Spatial::SpaceDependent, FeatureTable::TimeKeyed { source, .. }) => {
                return Err(Error::schema(format!(
                    "space-dependent feature '{}' found only in time-keyed table {source}",
                    def.name
                )));
            }
        }
        features.push(col);
        missing.push(mask);
    }

    let joined = Panel {
        grid: panel.grid.clone(),
        scope: panel.scope.clone(),
        schema: schema.clone(),
        pickups: panel.pickups.clone(),
        features,
        missing,
        slot_regions: panel.slot_regions.clone(),
        region_values,
    };
    joined.validate()?;
    Ok(joined)
}

//! Filling missing panel cells.
//!
//! Space-dependent cells borrow from the nearest region with data (breadth-
//! first over the adjacency graph, lexicographic tie-break). Space-
//! independent cells carry the previous slot forward; a missing opening
//! slot falls back to the feature's observed mean. A feature with no data
//! anywhere is an error.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::join::fill_spatial_cell;
use super::schema::Spatial;
use super::Panel;
use crate::error::{Error, Result};

/// Undirected region adjacency graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Adjacency {
    edges: BTreeMap<String, BTreeSet<String>>,
}

impl Adjacency {
    pub fn empty() -> Adjacency {
        Adjacency::default()
    }

    pub fn from_edges<I: IntoIterator<Item = (String, String)>>(pairs: I) -> Adjacency {
        let mut adj = Adjacency::default();
        for (a, b) in pairs {
            adj.insert(a, b);
        }
        adj
    }

    pub fn insert(&mut self, a: String, b: String) {
        self.edges.entry(a.clone()).or_default().insert(b.clone());
        self.edges.entry(b).or_default().insert(a);
    }

    /// Adds a region with no neighbors (a no-op if it already has edges).
    /// An isolated region can never borrow spatially, so its cells fall
    /// through to the temporal rules.
    pub fn insert_node(&mut self, region: String) {
        self.edges.entry(region).or_default();
    }

    pub fn contains(&self, region: &str) -> bool {
        self.edges.contains_key(region)
    }

    pub fn neighbors(&self, region: &str) -> impl Iterator<Item = &str> {
        self.edges
            .get(region)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Reads an adjacency CSV with header `region,neighbor`; edges are
/// undirected regardless of listing direction.
pub fn read_adjacency(path: &Path) -> Result<Adjacency> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_adjacency(&text, &path.display().to_string())
}

pub fn parse_adjacency(text: &str, file_label: &str) -> Result<Adjacency> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h.trim_end_matches('\r').trim(),
        None => return Err(Error::schema(format!("{file_label}: empty adjacency file"))),
    };
    if header != "region,neighbor" {
        return Err(Error::schema(format!(
            "{file_label}: expected header 'region,neighbor', got '{header}'"
        )));
    }
    let mut adj = Adjacency::default();
    for (idx, raw) in lines {
        let line_no = idx as u64 + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(file_label, line_no, "expected 2 fields"))?;
        let (a, b) = (a.trim(), b.trim());
        if a.is_empty() || b.is_empty() {
            return Err(Error::parse(file_label, line_no, "empty region name"));
        }
        adj.insert(a.to_string(), b.to_string());
    }
    Ok(adj)
}

/// What imputation changed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImputeReport {
    pub filled: usize,
    pub by_feature: BTreeMap<String, usize>,
}

/// Nearest region (breadth-first from `start`) that has a value; among
/// equally near candidates the lexicographically smallest region wins.
fn nearest_valued(
    start: &str,
    adjacency: &Adjacency,
    values: &BTreeMap<String, f64>,
) -> Option<f64> {
    let mut visited: BTreeSet<&str> = BTreeSet::new();
    let mut frontier: BTreeSet<&str> = BTreeSet::new();
    frontier.insert(start);
    visited.insert(start);
    while !frontier.is_empty() {
        // BTreeSet iteration is sorted, so the first hit in this depth
        // layer is the lexicographic winner.
        if let Some(v) = frontier.iter().find_map(|r| values.get(*r)) {
            return Some(*v);
        }
        let mut next: BTreeSet<&str> = BTreeSet::new();
        for r in &frontier {
            for n in adjacency.neighbors(r) {
                if visited.insert(n) {
                    next.insert(n);
                }
            }
        }
        frontier = next;
    }
    None
}

/// Fills every missing cell, returning the completed panel and a tally of
/// what was filled. Fails if a feature has no data anywhere to borrow from.
pub fn impute_missing(panel: &Panel, adjacency: &Adjacency) -> Result<(Panel, ImputeReport)> {
    // The spatial rules only make sense if the graph knows every region the
    // panel mentions.
    let mut unknown: BTreeSet<&str> = BTreeSet::new();
    for slot in &panel.slot_regions {
        for (region, _) in slot {
            if !adjacency.contains(region) {
                unknown.insert(region);
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::input(format!(
            "adjacency does not cover panel regions: {}",
            unknown.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }

    let mut out = panel.clone();
    let mut report = ImputeReport::default();
    let slots = panel.slots();

    for (fi, def) in panel.schema.features().iter().enumerate() {
        let observed_mean = {
            let vals = panel.observed_values(fi);
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        let region_values = panel.region_values.get(&def.name);
        let region_mean = region_values.and_then(|m| {
            if m.is_empty() {
                None
            } else {
                Some(m.values().sum::<f64>() / m.len() as f64)
            }
        });

        let mut filled_here = 0usize;
        for t in 0..slots {
            if !out.missing[fi][t] {
                continue;
            }
            let mut value: Option<f64> = None;

            if def.spatial == Spatial::SpaceDependent {
                if let Some(values) = region_values {
                    let regions: &[(String, u32)] = panel
                        .slot_regions
                        .get(t)
                        .map(|v| v.as_slice())
                        .unwrap_or(&[]);
                    // Impute a value per context region from its nearest
                    // valued neighbour, then combine exactly like the join.
                    let mut borrowed: BTreeMap<String, f64> = BTreeMap::new();
                    for (region, _) in regions {
                        if let Some(v) = nearest_valued(region, adjacency, values) {
                            borrowed.insert(region.clone(), v);
                        }
                    }
                    value = fill_spatial_cell(def.kind, regions, &borrowed);
                }
            }

            if value.is_none() && t > 0 {
                // Forward fill: the previous slot is already complete
                // because slots are processed in time order.
                value = Some(out.features[fi][t - 1]);
            }
            if value.is_none() {
                value = observed_mean.or(region_mean);
            }

            match value {
                Some(v) => {
                    out.features[fi][t] = v;
                    out.missing[fi][t] = false;
                    filled_here += 1;
                }
                None => {
                    return Err(Error::imputation(format!(
                        "feature '{}' has no values anywhere to impute from",
                        def.name
                    )));
                }
            }
        }
        if filled_here > 0 {
            report.by_feature.insert(def.name.clone(), filled_here);
            report.filled += filled_here;
        }
    }

    out.validate()?;
    Ok((out, report))
}

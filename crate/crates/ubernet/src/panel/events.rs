//! Pickup event parsing and aggregation into slot counts.

use std::path::Path;

use chrono::NaiveDateTime;

use super::grid::TimeGrid;
use super::{RegionScope, SlotRegions};
use crate::error::{Error, Result};

/// One pickup: when and in which region it happened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub time: NaiveDateTime,
    pub region: String,
}

/// Accepted timestamp spellings, tried in order.
const DATETIME_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
];

/// Parses a timestamp in any accepted spelling.
pub(crate) fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    DATETIME_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
}

/// Parses a pickup events CSV (`datetime,region` header). Events may arrive
/// in any order; ordering is imposed later by aggregation.
pub fn parse_events(text: &str, file_label: &str) -> Result<Vec<Event>> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h.trim_end_matches('\r').trim(),
        None => return Err(Error::schema(format!("{file_label}: empty events file"))),
    };
    if header != "datetime,region" {
        return Err(Error::schema(format!(
            "{file_label}: expected header 'datetime,region', got '{header}'"
        )));
    }
    let mut events = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx as u64 + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (ts, region) = line.split_once(',').ok_or_else(|| {
            Error::parse(file_label, line_no, "expected 2 comma-separated fields")
        })?;
        let time = parse_datetime(ts).ok_or_else(|| {
            Error::parse(
                file_label,
                line_no,
                format!("unparseable timestamp '{}'", ts.trim()),
            )
        })?;
        let region = region.trim();
        if region.is_empty() {
            return Err(Error::parse(file_label, line_no, "empty region"));
        }
        events.push(Event {
            time,
            region: region.to_string(),
        });
    }
    Ok(events)
}

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_events(&text, &path.display().to_string())
}

/// Result of counting events into grid slots.
///
/// Conservation holds by construction: the counts plus both dropped tallies
/// sum to the number of input events.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    /// Pickups per slot under the requested scope.
    pub counts: Vec<f64>,
    /// Per-slot region mix (sorted by region). Under a single-region scope
    /// the slot's one region is always present, even with zero pickups, so
    /// later spatial work has a region context for every slot.
    pub slot_regions: Vec<SlotRegions>,
    /// Events whose timestamp fell outside the grid span.
    pub dropped_outside_grid: usize,
    /// Events filtered out by a single-region scope.
    pub dropped_out_of_scope: usize,
}

/// Counts events into slots. A slot's count is the number of events whose
/// timestamp lies in `[slot_start, slot_start + δ)` and whose region
/// matches the scope; slots without events get zero, never a hole.
pub fn aggregate_counts(events: &[Event], grid: &TimeGrid, scope: &RegionScope) -> Aggregation {
    let slots = grid.slots();
    let mut counts = vec![0u32; slots];
    let mut region_maps: Vec<std::collections::BTreeMap<&str, u32>> =
        vec![std::collections::BTreeMap::new(); slots];
    let mut dropped_outside = 0usize;
    let mut dropped_scope = 0usize;

    for ev in events {
        if let RegionScope::Region(want) = scope {
            if &ev.region != want {
                dropped_scope += 1;
                continue;
            }
        }
        match grid.slot_of(ev.time) {
            Some(slot) => {
                counts[slot] += 1;
                *region_maps[slot].entry(ev.region.as_str()).or_insert(0) += 1;
            }
            None => dropped_outside += 1,
        }
    }

    let slot_regions: Vec<SlotRegions> = region_maps
        .into_iter()
        .map(|m| {
            let mut v: SlotRegions = m.into_iter().map(|(r, c)| (r.to_string(), c)).collect();
            if let RegionScope::Region(name) = scope {
                if v.is_empty() {
                    v.push((name.clone(), 0));
                }
            }
            v
        })
        .collect();

    Aggregation {
        counts: counts.into_iter().map(f64::from).collect(),
        slot_regions,
        dropped_outside_grid: dropped_outside,
        dropped_out_of_scope: dropped_scope,
    }
}

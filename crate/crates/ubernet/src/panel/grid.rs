//! Regular time grid of fixed-width slots.

use chrono::{Duration, NaiveDateTime};

use crate::error::{Error, Result};

/// Half-open span `[start, end)` cut into slots of `interval_minutes`.
///
/// Slot `i` covers `[start + i*δ, start + (i+1)*δ)`. The span length must be
/// an exact multiple of the interval. An empty grid (`start == end`) is legal
/// so that splits at the boundary produce well-formed empty panels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeGrid {
    start: NaiveDateTime,
    end: NaiveDateTime,
    interval_minutes: u32,
}

impl TimeGrid {
    pub fn new(start: NaiveDateTime, end: NaiveDateTime, interval_minutes: u32) -> Result<Self> {
        if interval_minutes == 0 {
            return Err(Error::range("grid interval must be positive"));
        }
        if end < start {
            return Err(Error::range(format!(
                "grid end {end} precedes start {start}"
            )));
        }
        let span = (end - start).num_minutes();
        if span % interval_minutes as i64 != 0 {
            return Err(Error::range(format!(
                "span from {start} to {end} is {span} minutes, not a multiple of the {interval_minutes}-minute interval"
            )));
        }
        Ok(TimeGrid {
            start,
            end,
            interval_minutes,
        })
    }

    /// Grid defined by a start plus a slot count.
    pub fn with_slots(start: NaiveDateTime, slots: usize, interval_minutes: u32) -> Result<Self> {
        if interval_minutes == 0 {
            return Err(Error::range("grid interval must be positive"));
        }
        let end = start + Duration::minutes(interval_minutes as i64 * slots as i64);
        TimeGrid::new(start, end, interval_minutes)
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn end(&self) -> NaiveDateTime {
        self.end
    }

    pub fn interval_minutes(&self) -> u32 {
        self.interval_minutes
    }

    pub fn slots(&self) -> usize {
        ((self.end - self.start).num_minutes() / self.interval_minutes as i64) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// Index of the slot containing `t`, or `None` when `t` is outside
    /// `[start, end)`. Membership is half-open: a timestamp exactly at a
    /// slot boundary belongs to the later slot, and `end` itself is outside.
    pub fn slot_of(&self, t: NaiveDateTime) -> Option<usize> {
        if t < self.start || t >= self.end {
            return None;
        }
        Some(((t - self.start).num_minutes() / self.interval_minutes as i64) as usize)
    }

    /// Start timestamp of slot `i` (must be `< slots()`).
    pub fn slot_start(&self, i: usize) -> NaiveDateTime {
        debug_assert!(i < self.slots());
        self.start + Duration::minutes(self.interval_minutes as i64 * i as i64)
    }

    /// Sub-grid covering slots `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> Result<TimeGrid> {
        if from > to || to > self.slots() {
            return Err(Error::range(format!(
                "slot slice {from}..{to} outside grid of {} slots",
                self.slots()
            )));
        }
        let start = self.start + Duration::minutes(self.interval_minutes as i64 * from as i64);
        let end = self.start + Duration::minutes(self.interval_minutes as i64 * to as i64);
        TimeGrid::new(start, end, self.interval_minutes)
    }
}

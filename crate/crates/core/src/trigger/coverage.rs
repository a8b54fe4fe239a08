//! Expected-versus-actual trigger accounting.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{SlotId, TriggerConfig, TriggerEvent, SECONDS_PER_DAY};

/// Half-open time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Interval { start, end }
    }

    pub fn len(&self) -> f64 {
        (self.end - self.start).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlap(&self, other: &Interval) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }
}

/// Sorts and merges overlapping or touching intervals; empty ones are dropped.
pub fn merge_intervals(intervals: &[Interval]) -> Vec<Interval> {
    let mut sorted: Vec<Interval> = intervals.iter().copied().filter(|i| !i.is_empty()).collect();
    sorted.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut merged: Vec<Interval> = Vec::with_capacity(sorted.len());
    for i in sorted {
        match merged.last_mut() {
            Some(last) if i.start <= last.end => last.end = last.end.max(i.end),
            _ => merged.push(i),
        }
    }
    merged
}

/// Slot instances whose whole `[start, deadline]` window lies inside uptime.
pub fn expected_slots(config: &TriggerConfig, uptime: &[Interval]) -> Vec<SlotId> {
    let mut out = BTreeSet::new();
    for iv in merge_intervals(uptime) {
        let first_day = (iv.start.max(0.0) / SECONDS_PER_DAY).floor() as u32;
        let last_day = (iv.end / SECONDS_PER_DAY).floor() as u32;
        for day in first_day..=last_day {
            for index in 0..config.slots.len() as u32 {
                let slot = SlotId { day, index };
                let (start, deadline) = config.window_of(slot);
                if start >= iv.start && deadline <= iv.end {
                    out.insert(slot);
                }
            }
        }
    }
    out.into_iter().collect()
}

pub fn expected_count(config: &TriggerConfig, uptime: &[Interval]) -> usize {
    expected_slots(config, uptime).len()
}

/// Triggers that belong to an expected slot.
pub fn triggers_within(triggers: &[TriggerEvent], expected: &[SlotId]) -> usize {
    let expected: BTreeSet<SlotId> = expected.iter().copied().collect();
    triggers.iter().filter(|t| expected.contains(&t.slot)).count()
}

/// `triggered / expected`, 1.0 when nothing was expected, capped at 1.
pub fn coverage(triggered: usize, expected: usize) -> f64 {
    if expected == 0 {
        1.0
    } else {
        (triggered as f64 / expected as f64).min(1.0)
    }
}

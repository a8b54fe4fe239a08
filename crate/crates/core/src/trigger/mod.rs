//! Dyadic-interaction trigger state machine.
//!
//! Fuses proximity transitions and speech activity into fixed-length
//! recordings. Each daily slot gets at most one recording: an algorithm
//! trigger when the partners are near and talking, otherwise a scheduled
//! trigger at the slot deadline. Time only advances through event
//! timestamps, so a run is a pure function of the event stream.

mod coverage;
mod fsm;
mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proximity::Phase;

pub use coverage::{coverage, expected_count, expected_slots, merge_intervals, triggers_within, Interval};
pub use fsm::TriggerFsm;
pub use io::{read_events_jsonl, write_actions_jsonl, write_events_jsonl};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// A daily window `[start, deadline)` in seconds since midnight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub start: f64,
    pub deadline: f64,
}

impl Slot {
    pub fn hours(start: f64, deadline: f64) -> Self {
        Slot {
            start: start * 3600.0,
            deadline: deadline * 3600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriggerConfig {
    pub recording_duration: f64,
    /// Minimum seconds from the previous start (of either kind) before an
    /// algorithm trigger may fire.
    pub min_gap: f64,
    pub slots: Vec<Slot>,
    /// Cap on triggers per day; `None` means one per slot.
    pub max_per_day: Option<u32>,
    /// Seconds of speech required inside the confirmation window.
    pub speech_confirm: f64,
    pub confirm_window: f64,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        TriggerConfig {
            recording_duration: 300.0,
            min_gap: 3600.0,
            slots: vec![
                Slot::hours(9.0, 12.0),
                Slot::hours(12.0, 15.0),
                Slot::hours(15.0, 18.0),
                Slot::hours(18.0, 21.0),
            ],
            max_per_day: None,
            speech_confirm: 5.0,
            confirm_window: 30.0,
        }
    }
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.recording_duration > 0.0) {
            return fail("recording_duration must be positive".into());
        }
        if !(self.min_gap >= self.recording_duration) {
            return fail(format!(
                "min_gap ({}) must be >= recording_duration ({})",
                self.min_gap, self.recording_duration
            ));
        }
        if self.slots.is_empty() {
            return fail("at least one slot is required".into());
        }
        let mut prev_deadline = 0.0;
        for (i, s) in self.slots.iter().enumerate() {
            if !(s.start >= prev_deadline && s.deadline > s.start && s.deadline <= SECONDS_PER_DAY) {
                return fail(format!(
                    "slot {i} [{}, {}) must lie within the day, after the previous slot",
                    s.start, s.deadline
                ));
            }
            if s.deadline - s.start < self.recording_duration {
                return fail(format!(
                    "slot {i} is shorter than one recording ({} s)",
                    self.recording_duration
                ));
            }
            prev_deadline = s.deadline;
        }
        if self.max_per_day == Some(0) {
            return fail("max_per_day must be >= 1".into());
        }
        if !(self.speech_confirm >= 0.0 && self.confirm_window >= self.speech_confirm) {
            return fail(format!(
                "need 0 <= speech_confirm <= confirm_window, got {} and {}",
                self.speech_confirm, self.confirm_window
            ));
        }
        Ok(())
    }

    pub fn daily_cap(&self) -> u32 {
        self.max_per_day.unwrap_or(self.slots.len() as u32)
    }

    /// Absolute deadline of a slot instance.
    pub fn deadline_of(&self, slot: SlotId) -> f64 {
        slot.day as f64 * SECONDS_PER_DAY + self.slots[slot.index as usize].deadline
    }

    pub fn window_of(&self, slot: SlotId) -> (f64, f64) {
        let base = slot.day as f64 * SECONDS_PER_DAY;
        let s = self.slots[slot.index as usize];
        (base + s.start, base + s.deadline)
    }

    /// The slot whose window contains `t`, if any.
    pub fn slot_at(&self, t: f64) -> Option<SlotId> {
        if t < 0.0 {
            return None;
        }
        let day = (t / SECONDS_PER_DAY).floor();
        let tod = t - day * SECONDS_PER_DAY;
        self.slots
            .iter()
            .position(|s| tod >= s.start && tod < s.deadline)
            .map(|i| SlotId {
                day: day as u32,
                index: i as u32,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotId {
    pub day: u32,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerKind {
    Algorithm,
    Scheduled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub kind: TriggerKind,
    pub t_start: f64,
    pub slot: SlotId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordingSession {
    pub trigger: TriggerEvent,
    pub t_end: f64,
    pub prompt_emitted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfReportPrompt {
    pub t: f64,
    /// Index of the session in start order.
    pub session: usize,
}

/// Inputs to the state machine, each stamped with time in seconds since
/// scenario start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FsmEvent {
    Proximity { t: f64, phase: Phase },
    Speech { t: f64, active: bool },
    Tick { t: f64 },
    /// App lifecycle; while stopped no triggers fire and missed deadlines
    /// are skipped.
    App { t: f64, running: bool },
}

impl FsmEvent {
    pub fn t(&self) -> f64 {
        match *self {
            FsmEvent::Proximity { t, .. }
            | FsmEvent::Speech { t, .. }
            | FsmEvent::Tick { t }
            | FsmEvent::App { t, .. } => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    StartRecording { t: f64, session: usize, trigger: TriggerEvent },
    StopRecording { t: f64, session: usize },
    EmitPrompt { t: f64, prompt: SelfReportPrompt },
    TriggerLogged { t: f64, trigger: TriggerEvent },
}

impl Action {
    pub fn t(&self) -> f64 {
        match *self {
            Action::StartRecording { t, .. }
            | Action::StopRecording { t, .. }
            | Action::EmitPrompt { t, .. }
            | Action::TriggerLogged { t, .. } => t,
        }
    }
}

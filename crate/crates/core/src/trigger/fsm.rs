use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{
    Action, FsmEvent, RecordingSession, SelfReportPrompt, SlotId, TriggerConfig, TriggerEvent,
    TriggerKind,
};
use crate::error::{Error, Result};
use crate::proximity::Phase;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Timer {
    Stop(usize),
    Deadline(SlotId),
}

#[derive(Debug, Clone)]
pub struct TriggerFsm {
    config: TriggerConfig,
    now: Option<f64>,
    running: bool,
    near: bool,
    speech_open: Option<f64>,
    speech_history: VecDeque<(f64, f64)>,
    active: Option<usize>,
    sessions: Vec<RecordingSession>,
    prompts: Vec<SelfReportPrompt>,
    triggered: BTreeSet<SlotId>,
    last_start: Option<f64>,
    day_counts: BTreeMap<u32, u32>,
    next_deadline: SlotId,
    log: Vec<Action>,
}

impl TriggerFsm {
    pub fn new(config: TriggerConfig) -> Result<Self> {
        config.validate()?;
        Ok(TriggerFsm {
            config,
            now: None,
            running: true,
            near: false,
            speech_open: None,
            speech_history: VecDeque::new(),
            active: None,
            sessions: Vec::new(),
            prompts: Vec::new(),
            triggered: BTreeSet::new(),
            last_start: None,
            day_counts: BTreeMap::new(),
            next_deadline: SlotId { day: 0, index: 0 },
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &TriggerConfig {
        &self.config
    }

    pub fn now(&self) -> Option<f64> {
        self.now
    }

    pub fn is_running(&self) -> bool {
        self.running
    }

    pub fn is_recording(&self) -> bool {
        self.active.is_some()
    }

    /// All sessions in start order, including one still recording.
    pub fn sessions(&self) -> &[RecordingSession] {
        &self.sessions
    }

    pub fn completed_sessions(&self) -> impl Iterator<Item = &RecordingSession> {
        self.sessions.iter().filter(|s| s.prompt_emitted)
    }

    pub fn prompts(&self) -> &[SelfReportPrompt] {
        &self.prompts
    }

    pub fn triggers(&self) -> Vec<TriggerEvent> {
        self.sessions.iter().map(|s| s.trigger).collect()
    }

    /// Every action emitted so far.
    pub fn log(&self) -> &[Action] {
        &self.log
    }

    pub fn into_log(self) -> Vec<Action> {
        self.log
    }

    /// Runs a whole event stream from a fresh state.
    pub fn replay(config: TriggerConfig, events: &[FsmEvent]) -> Result<Vec<Action>> {
        let mut fsm = TriggerFsm::new(config)?;
        for e in events {
            fsm.step(e)?;
        }
        Ok(fsm.into_log())
    }

    /// Seconds of speech inside `[t - confirm_window, t]`.
    pub fn speech_in_window(&self, t: f64) -> f64 {
        let lo = t - self.config.confirm_window;
        let overlap = |a: f64, b: f64| (b.min(t) - a.max(lo)).max(0.0);
        let closed: f64 = self.speech_history.iter().map(|&(a, b)| overlap(a, b)).sum();
        closed + self.speech_open.map_or(0.0, |a| overlap(a, t))
    }

    fn daily_count(&self, day: u32) -> u32 {
        self.day_counts.get(&day).copied().unwrap_or(0)
    }

    /// The open, untriggered slot in which an algorithm trigger could fire at
    /// `t` given the non-sensor conditions (uptime, no active recording,
    /// min_gap, daily cap).
    pub fn armed_slot(&self, t: f64) -> Option<SlotId> {
        if !self.running || self.active.is_some() {
            return None;
        }
        if self.last_start.is_some_and(|s| t - s < self.config.min_gap) {
            return None;
        }
        let slot = self.config.slot_at(t)?;
        if self.triggered.contains(&slot) || self.daily_count(slot.day) >= self.config.daily_cap() {
            return None;
        }
        Some(slot)
    }

    /// True when proximity and speech are the only missing conditions.
    pub fn is_armed(&self, t: f64) -> bool {
        self.armed_slot(t).is_some()
    }

    fn next_timer(&self) -> Option<(f64, Timer)> {
        let stop = self
            .active
            .map(|i| (self.sessions[i].t_end, Timer::Stop(i)));
        let deadline = (
            self.config.deadline_of(self.next_deadline),
            Timer::Deadline(self.next_deadline),
        );
        // a stop at the same instant as a deadline goes first
        match stop {
            Some(s) if s.0 <= deadline.0 => Some(s),
            _ => Some(deadline),
        }
    }

    fn advance_deadline_cursor(&mut self) {
        let n = self.config.slots.len() as u32;
        let SlotId { day, index } = self.next_deadline;
        self.next_deadline = if index + 1 < n {
            SlotId { day, index: index + 1 }
        } else {
            SlotId { day: day + 1, index: 0 }
        };
    }

    fn advance_to(&mut self, t: f64, actions: &mut Vec<Action>) {
        while let Some((at, timer)) = self.next_timer() {
            if at > t {
                break;
            }
            match timer {
                Timer::Stop(i) => {
                    self.active = None;
                    let session = &mut self.sessions[i];
                    session.prompt_emitted = true;
                    let prompt = SelfReportPrompt { t: at, session: i };
                    self.prompts.push(prompt);
                    actions.push(Action::StopRecording { t: at, session: i });
                    actions.push(Action::EmitPrompt { t: at, prompt });
                }
                Timer::Deadline(slot) => {
                    self.advance_deadline_cursor();
                    if self.running && !self.triggered.contains(&slot) {
                        if self.active.is_none() {
                            self.start(TriggerKind::Scheduled, at, slot, actions);
                        } else {
                            log::warn!("slot {slot:?} deadline at {at} fell inside a recording");
                        }
                    }
                }
            }
        }
    }

    fn start(&mut self, kind: TriggerKind, t: f64, slot: SlotId, actions: &mut Vec<Action>) {
        let trigger = TriggerEvent { kind, t_start: t, slot };
        self.triggered.insert(slot);
        self.last_start = Some(t);
        *self.day_counts.entry(slot.day).or_insert(0) += 1;
        let session = self.sessions.len();
        self.sessions.push(RecordingSession {
            trigger,
            t_end: t + self.config.recording_duration,
            prompt_emitted: false,
        });
        self.active = Some(session);
        actions.push(Action::TriggerLogged { t, trigger });
        actions.push(Action::StartRecording { t, session, trigger });
    }

    fn close_speech(&mut self, t: f64) {
        if let Some(a) = self.speech_open.take() {
            if t > a {
                self.speech_history.push_back((a, t));
            }
        }
    }

    /// Applies one event and returns the actions it caused, including any
    /// timers (recording stops, slot deadlines) that elapsed before it.
    pub fn step(&mut self, event: &FsmEvent) -> Result<Vec<Action>> {
        let t = event.t();
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Stream(format!("invalid event time {t}")));
        }
        if let Some(now) = self.now {
            if t < now {
                return Err(Error::Stream(format!("event time went backwards: {t} after {now}")));
            }
        }
        let mut actions = Vec::new();
        self.advance_to(t, &mut actions);
        self.now = Some(t);

        match *event {
            FsmEvent::Proximity { phase, .. } => self.near = phase == Phase::Near,
            FsmEvent::Speech { active: true, .. } => {
                if self.speech_open.is_none() {
                    self.speech_open = Some(t);
                }
            }
            FsmEvent::Speech { active: false, .. } => self.close_speech(t),
            FsmEvent::Tick { .. } => {}
            FsmEvent::App { running, .. } => {
                if !running {
                    self.close_speech(t);
                    self.near = false;
                }
                self.running = running;
            }
        }

        let horizon = t - self.config.confirm_window;
        while self.speech_history.front().is_some_and(|&(_, b)| b < horizon) {
            self.speech_history.pop_front();
        }

        if self.near && self.speech_in_window(t) >= self.config.speech_confirm {
            if let Some(slot) = self.armed_slot(t) {
                self.start(TriggerKind::Algorithm, t, slot, &mut actions);
            }
        }
        self.log.extend_from_slice(&actions);
        Ok(actions)
    }

    /// Advances the clock to `t` without any other input.
    pub fn finish(&mut self, t: f64) -> Result<Vec<Action>> {
        self.step(&FsmEvent::Tick { t })
    }
}

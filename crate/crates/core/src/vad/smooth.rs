use serde::{Deserialize, Serialize};

use super::VadDecision;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HysteresisConfig {
    /// Consecutive speech frames needed to enter speech.
    pub enter_frames: u32,
    /// Consecutive non-speech frames needed to leave speech.
    pub exit_frames: u32,
    /// Segments shorter than this (seconds) are discarded.
    pub min_segment: f64,
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        HysteresisConfig {
            enter_frames: 3,
            exit_frames: 5,
            min_segment: 0.3,
        }
    }
}

impl HysteresisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.enter_frames == 0 || self.exit_frames == 0 {
            return Err(Error::Config(
                "hysteresis enter_frames and exit_frames must be >= 1".into(),
            ));
        }
        if !(self.min_segment >= 0.0 && self.min_segment.is_finite()) {
            return Err(Error::Config("min_segment must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeechSegment {
    pub start: f64,
    pub end: f64,
}

impl SpeechSegment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

/// Segment boundaries as the streaming smoother learns them. `at` is the
/// stream time at which the edge became known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentEdge {
    /// A segment is confirmed and has already lasted `min_segment`.
    Opened { start: f64, at: f64 },
    Closed { segment: SpeechSegment, at: f64 },
}

impl SegmentEdge {
    pub fn at(&self) -> f64 {
        match *self {
            SegmentEdge::Opened { at, .. } | SegmentEdge::Closed { at, .. } => at,
        }
    }
}

/// Streaming hysteresis automaton over per-frame VAD labels.
///
/// Speech is entered after `enter_frames` consecutive speech labels (the
/// segment starts at the first of them) and left after `exit_frames`
/// consecutive non-speech labels (the segment ends at the first of those).
/// `Opened` is emitted only for segments that reach `min_segment`, and every
/// `Opened` is eventually followed by exactly one `Closed`.
#[derive(Debug, Clone)]
pub struct HysteresisSmoother {
    cfg: HysteresisConfig,
    hop_seconds: f64,
    origin: f64,
    in_speech: bool,
    // First frame and length of the current run of labels opposing the state.
    run_start: u64,
    run_len: u32,
    segment_start: u64,
    opened: bool,
    last_frame: Option<u64>,
}

impl HysteresisSmoother {
    pub fn new(cfg: HysteresisConfig, hop_seconds: f64) -> Result<Self> {
        Self::with_origin(cfg, hop_seconds, 0.0)
    }

    /// Frame `i` is placed at `origin + i * hop_seconds`.
    pub fn with_origin(cfg: HysteresisConfig, hop_seconds: f64, origin: f64) -> Result<Self> {
        cfg.validate()?;
        if !(hop_seconds > 0.0) {
            return Err(Error::Config("hop_seconds must be positive".into()));
        }
        Ok(HysteresisSmoother {
            cfg,
            hop_seconds,
            origin,
            in_speech: false,
            run_start: 0,
            run_len: 0,
            segment_start: 0,
            opened: false,
            last_frame: None,
        })
    }

    fn time(&self, frame: u64) -> f64 {
        self.origin + frame as f64 * self.hop_seconds
    }

    fn long_enough(&self, start: u64, end: u64) -> bool {
        (end - start) as f64 * self.hop_seconds >= self.cfg.min_segment
    }

    pub fn in_speech(&self) -> bool {
        self.in_speech
    }

    /// True when an `Opened` edge has been emitted and not yet closed.
    pub fn is_open(&self) -> bool {
        self.opened
    }

    pub fn push(&mut self, decision: &VadDecision) -> Option<SegmentEdge> {
        let frame = decision.frame_index;
        let speech = decision.label.is_speech();
        self.last_frame = Some(frame);
        let now = self.time(frame + 1);

        if speech == self.in_speech {
            self.run_len = 0;
        } else {
            if self.run_len == 0 {
                self.run_start = frame;
            }
            self.run_len += 1;
            if !self.in_speech && self.run_len >= self.cfg.enter_frames {
                self.in_speech = true;
                self.segment_start = self.run_start;
                self.run_len = 0;
            } else if self.in_speech && self.run_len >= self.cfg.exit_frames {
                self.in_speech = false;
                self.run_len = 0;
                return self.close(self.run_start, now);
            }
        }

        if self.in_speech && !self.opened {
            let provisional_end = if self.run_len > 0 { self.run_start } else { frame + 1 };
            if self.long_enough(self.segment_start, provisional_end) {
                self.opened = true;
                return Some(SegmentEdge::Opened {
                    start: self.time(self.segment_start),
                    at: now,
                });
            }
        }
        None
    }

    fn close(&mut self, end_frame: u64, at: f64) -> Option<SegmentEdge> {
        if !std::mem::take(&mut self.opened) {
            return None;
        }
        Some(SegmentEdge::Closed {
            segment: SpeechSegment {
                start: self.time(self.segment_start),
                end: self.time(end_frame),
            },
            at,
        })
    }

    /// Ends the stream, closing any open segment at the last observed frame.
    pub fn finish(&mut self) -> Option<SegmentEdge> {
        let last = self.last_frame?;
        if !self.in_speech {
            return None;
        }
        self.in_speech = false;
        let end = if self.run_len > 0 { self.run_start } else { last + 1 };
        self.run_len = 0;
        self.close(end, self.time(last + 1))
    }

    /// Force-closes at an arbitrary time, for when the frame source stops
    /// (e.g. the detector is duty-cycled off).
    pub fn interrupt(&mut self, at: f64) -> Option<SegmentEdge> {
        let last = self.last_frame?;
        if !self.in_speech {
            return None;
        }
        self.in_speech = false;
        let end = if self.run_len > 0 { self.run_start } else { last + 1 };
        self.run_len = 0;
        self.close(end, at.max(self.time(end)))
    }
}

/// Batch smoothing: all segments of at least `min_segment`, disjoint and in
/// order.
pub fn smooth(
    decisions: &[VadDecision],
    cfg: &HysteresisConfig,
    hop_seconds: f64,
) -> Result<Vec<SpeechSegment>> {
    let mut smoother = HysteresisSmoother::new(cfg.clone(), hop_seconds)?;
    let mut segments = Vec::new();
    let edges = decisions
        .iter()
        .filter_map(|d| smoother.push(d))
        .collect::<Vec<_>>()
        .into_iter()
        .chain(smoother.finish());
    for edge in edges {
        if let SegmentEdge::Closed { segment, .. } = edge {
            segments.push(segment);
        }
    }
    Ok(segments)
}

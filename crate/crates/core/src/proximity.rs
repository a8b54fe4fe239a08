//! Debounced near/far proximity from a stream of RSSI samples.
//!
//! RSSI is smoothed with an EWMA in the dBm domain, compared against a
//! threshold, and a phase change commits only after the candidate phase has
//! held for a dwell count of consecutive samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssiSample {
    #[serde(rename = "t")]
    pub timestamp: f64,
    pub rssi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProximityConfig {
    pub threshold_dbm: f64,
    pub ewma_alpha: f64,
    /// Consecutive near candidates needed to commit to near.
    pub enter_dwell: u32,
    /// Consecutive far candidates needed to commit to far.
    pub exit_dwell: u32,
    /// Seconds without a sample after which the phase becomes unknown.
    pub stale_timeout: f64,
}

impl Default for ProximityConfig {
    fn default() -> Self {
        ProximityConfig {
            threshold_dbm: -70.0,
            ewma_alpha: 0.3,
            enter_dwell: 3,
            exit_dwell: 5,
            stale_timeout: 10.0,
        }
    }
}

impl ProximityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            return Err(Error::Config(format!(
                "ewma_alpha must be in (0, 1], got {}",
                self.ewma_alpha
            )));
        }
        if self.enter_dwell == 0 || self.exit_dwell == 0 {
            return Err(Error::Config("dwell counts must be >= 1".into()));
        }
        if !(self.stale_timeout > 0.0) || !self.threshold_dbm.is_finite() {
            return Err(Error::Config(
                "stale_timeout must be positive and threshold finite".into(),
            ));
        }
        Ok(())
    }

    fn dwell_for(&self, target: Phase) -> u32 {
        match target {
            Phase::Near => self.enter_dwell,
            _ => self.exit_dwell,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Near,
    Far,
    Unknown,
}

/// A committed phase change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProximityTransition {
    pub t: f64,
    pub from: Phase,
    pub to: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityState {
    pub smoothed_rssi: Option<f64>,
    pub phase: Phase,
    pub candidate: Option<Phase>,
    pub dwell_counter: u32,
    pub last_update: Option<f64>,
}

impl Default for ProximityState {
    fn default() -> Self {
        ProximityState {
            smoothed_rssi: None,
            phase: Phase::Unknown,
            candidate: None,
            dwell_counter: 0,
            last_update: None,
        }
    }
}

impl ProximityState {
    pub fn new() -> Self {
        Self::default()
    }

    fn check_order(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::Stream(format!("non-finite timestamp {t}")));
        }
        match self.last_update {
            Some(last) if t < last => Err(Error::Stream(format!(
                "RSSI timestamp went backwards: {t} after {last}"
            ))),
            _ => Ok(()),
        }
    }

    /// EWMA update `s' = α·rssi + (1-α)·s`; the first sample initializes `s`.
    pub fn smooth_rssi(&mut self, sample: &RssiSample, alpha: f64) -> Result<f64> {
        self.check_order(sample.timestamp)?;
        let s = match self.smoothed_rssi {
            None => sample.rssi,
            Some(prev) => alpha * sample.rssi + (1.0 - alpha) * prev,
        };
        self.smoothed_rssi = Some(s);
        self.last_update = Some(sample.timestamp);
        Ok(s)
    }

    /// Forces `Unknown` if no sample arrived within the stale timeout before
    /// `now`. Smoothing restarts with the next sample.
    pub fn expire(&mut self, now: f64, config: &ProximityConfig) -> Option<ProximityTransition> {
        let last = self.last_update?;
        if now - last <= config.stale_timeout {
            return None;
        }
        self.smoothed_rssi = None;
        self.candidate = None;
        self.dwell_counter = 0;
        self.last_update = None;
        let from = std::mem::replace(&mut self.phase, Phase::Unknown);
        (from != Phase::Unknown).then_some(ProximityTransition {
            t: last + config.stale_timeout,
            from,
            to: Phase::Unknown,
        })
    }

    /// Applies one sample. May return a staleness transition (for the gap
    /// before this sample) followed by a dwell-committed transition.
    pub fn update(
        &mut self,
        sample: &RssiSample,
        config: &ProximityConfig,
    ) -> Result<Vec<ProximityTransition>> {
        self.check_order(sample.timestamp)?;
        let mut events = Vec::new();
        events.extend(self.expire(sample.timestamp, config));
        let smoothed = self.smooth_rssi(sample, config.ewma_alpha)?;
        let candidate = if smoothed >= config.threshold_dbm {
            Phase::Near
        } else {
            Phase::Far
        };
        if candidate == self.phase {
            self.candidate = None;
            self.dwell_counter = 0;
        } else {
            if self.candidate == Some(candidate) {
                self.dwell_counter += 1;
            } else {
                self.candidate = Some(candidate);
                self.dwell_counter = 1;
            }
            if self.dwell_counter >= config.dwell_for(candidate) {
                let from = std::mem::replace(&mut self.phase, candidate);
                self.candidate = None;
                self.dwell_counter = 0;
                events.push(ProximityTransition {
                    t: sample.timestamp,
                    from,
                    to: candidate,
                });
            }
        }
        Ok(events)
    }
}

/// Single-stream detector bundling state and configuration.
#[derive(Debug, Clone)]
pub struct ProximityDetector {
    config: ProximityConfig,
    state: ProximityState,
}

impl ProximityDetector {
    pub fn new(config: ProximityConfig) -> Result<Self> {
        config.validate()?;
        Ok(ProximityDetector {
            config,
            state: ProximityState::new(),
        })
    }

    pub fn config(&self) -> &ProximityConfig {
        &self.config
    }

    pub fn state(&self) -> &ProximityState {
        &self.state
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn update(&mut self, sample: &RssiSample) -> Result<Vec<ProximityTransition>> {
        self.state.update(sample, &self.config)
    }

    pub fn expire(&mut self, now: f64) -> Option<ProximityTransition> {
        self.state.expire(now, &self.config)
    }

    /// Runs a whole trace and returns every transition.
    pub fn run(config: ProximityConfig, samples: &[RssiSample]) -> Result<Vec<ProximityTransition>> {
        let mut det = ProximityDetector::new(config)?;
        let mut out = Vec::new();
        for s in samples {
            out.extend(det.update(s)?);
        }
        Ok(out)
    }
}

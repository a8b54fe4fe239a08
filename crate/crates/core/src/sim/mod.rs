//! Seeded synthetic two-device scenarios and their replay through the
//! proximity → VAD → trigger pipeline.
//!
//! Everything is a pure function of `(seed, params)`: long streams (audio,
//! RSSI, HR, IMU) are synthesized on demand from per-second sub-seeds, so a
//! twelve-hour scenario never materializes its audio.

mod corpus;
mod report;
mod run;
mod synth;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::emotion::{HrSample, ImuSample};
use crate::error::{Error, Result};
use crate::proximity::RssiSample;
use crate::trigger::{merge_intervals, Interval};

pub use corpus::{
    emotion_corpus, evaluate_vad, train_default_vad, vad_corpus, xor_fixture, EmotionCorpus, VadCorpus,
    VadEvaluation,
};
pub use report::{BatterySummary, BatteryReport};
pub use run::{run_battery, run_simulation, SimReport, SimRun, SimTraces, SpeechSource, CONTAINMENT_SECONDS};
pub use synth::{tone_stack_power, SpeechCarrier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RssiParams {
    pub near_mean: f64,
    pub far_mean: f64,
    pub noise_sd: f64,
}

impl Default for RssiParams {
    fn default() -> Self {
        RssiParams { near_mean: -55.0, far_mean: -85.0, noise_sd: 6.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioParams {
    pub sample_rate: u32,
    pub snr_db: (f64, f64),
    /// Range of the white-noise standard deviation (full scale = 1).
    pub noise_level: (f64, f64),
    pub f0_hz: (f64, f64),
    pub harmonics: usize,
    pub am_hz: f64,
    pub am_depth: f64,
}

impl Default for AudioParams {
    fn default() -> Self {
        AudioParams {
            sample_rate: 16_000,
            snr_db: (0.0, 10.0),
            noise_level: (0.005, 0.05),
            f0_hz: (90.0, 250.0),
            harmonics: 3,
            am_hz: 4.0,
            am_depth: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorParams {
    pub hr_baseline: f64,
    pub hr_sd: f64,
    /// Heart-rate increase while interacting.
    pub hr_interaction_lift: f64,
    pub imu_rate: f64,
    /// Accelerometer motion amplitude in m/s².
    pub motion_sd: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams {
            hr_baseline: 70.0,
            hr_sd: 3.0,
            hr_interaction_lift: 6.0,
            imu_rate: 20.0,
            motion_sd: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    /// Scenario start in seconds since midnight of day 0.
    pub start: f64,
    pub duration: f64,
    /// Fraction of the scenario spent in conversation.
    pub density: f64,
    pub mean_segment: f64,
    pub min_segment: f64,
    /// Chance that a conversation happens with the watches out of range.
    pub apart_probability: f64,
    /// Per-gap chance of co-presence without speech.
    pub silent_copresence_probability: f64,
    /// Per-gap chance of co-presence with non-conversational speech (TV, a
    /// phone call).
    pub background_speech_probability: f64,
    pub rssi: RssiParams,
    pub audio: AudioParams,
    pub sensors: SensorParams,
    /// App uptime in absolute seconds; `None` means the whole scenario.
    pub uptime: Option<Vec<Interval>>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            start: 9.0 * 3600.0,
            duration: 12.0 * 3600.0,
            density: 0.3,
            mean_segment: 1800.0,
            min_segment: 60.0,
            apart_probability: 0.2,
            silent_copresence_probability: 0.2,
            background_speech_probability: 0.15,
            rssi: RssiParams::default(),
            audio: AudioParams::default(),
            sensors: SensorParams::default(),
            uptime: None,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo <= hi {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be an ordered finite range, got ({lo}, {hi})")))
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.start >= 0.0 && self.duration > 0.0 && self.duration.is_finite()) {
            return fail("sim.start must be >= 0 and sim.duration positive".into());
        }
        if !(0.0..1.0).contains(&self.density) {
            return fail(format!("sim.density must lie in [0, 1), got {}", self.density));
        }
        if !(self.min_segment > 0.0 && self.mean_segment >= self.min_segment) {
            return fail("need 0 < sim.min_segment <= sim.mean_segment".into());
        }
        for (name, p) in [
            ("apart_probability", self.apart_probability),
            ("silent_copresence_probability", self.silent_copresence_probability),
            ("background_speech_probability", self.background_speech_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("sim.{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.silent_copresence_probability + self.background_speech_probability > 1.0 {
            return fail("confounder probabilities must sum to at most 1".into());
        }
        if !(self.rssi.noise_sd >= 0.0) {
            return fail("sim.rssi.noise_sd must be >= 0".into());
        }
        let a = &self.audio;
        check_range("sim.audio.snr_db", a.snr_db)?;
        check_range("sim.audio.noise_level", a.noise_level)?;
        check_range("sim.audio.f0_hz", a.f0_hz)?;
        if a.sample_rate == 0 || a.harmonics == 0 || a.noise_level.0 <= 0.0 || a.f0_hz.0 <= 0.0 {
            return fail("sim.audio needs positive sample_rate, harmonics, noise_level and f0".into());
        }
        if a.f0_hz.1 * a.harmonics as f64 >= a.sample_rate as f64 / 2.0 {
            return fail("sim.audio harmonics exceed Nyquist".into());
        }
        if !(0.0..=1.0).contains(&a.am_depth) || !(a.am_hz >= 0.0) {
            return fail("sim.audio.am_depth must lie in [0, 1] and am_hz >= 0".into());
        }
        if !(self.sensors.imu_rate > 0.0 && self.sensors.hr_sd >= 0.0 && self.sensors.motion_sd >= 0.0) {
            return fail("sim.sensors rates and spreads must be non-negative (imu_rate positive)".into());
        }
        if let Some(up) = &self.uptime {
            if up.iter().any(|i| !(i.start.is_finite() && i.end.is_finite())) {
                return fail("sim.uptime intervals must be finite".into());
            }
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Independent sub-stream seed: SplitMix64 over (seed, stream, index).
pub(crate) fn sub_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(seed, stream, index))
}

const STREAM_LAYOUT: u64 = 1;
const STREAM_RSSI: u64 = 2;
const STREAM_AUDIO: u64 = 3;
const STREAM_HR: u64 = 4;
const STREAM_IMU: u64 = 5;

/// Ground truth and generator state of one synthetic day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub params: ScenarioParams,
    /// Conversations, disjoint and ordered.
    pub interactions: Vec<Interval>,
    /// Conversations during which the watches were out of range.
    pub apart: Vec<bool>,
    pub silent_copresence: Vec<Interval>,
    pub background_speech: Vec<Interval>,
    /// Every interval carrying speech audio, ordered.
    pub speech: Vec<SpeechCarrier>,
    pub noise_level: f64,
    pub uptime: Vec<Interval>,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws a scenario. Conversation lengths are exponential, rescaled so
/// they sum to exactly `density * duration`, and placed with Dirichlet
/// gaps.
pub fn generate_scenario(seed: u64, params: &ScenarioParams) -> Result<Scenario> {
    params.validate()?;
    let mut rng = rng_for(seed, STREAM_LAYOUT, 0);
    let total = params.density * params.duration;
    let exp = Exp::new(1.0 / params.mean_segment).map_err(|e| Error::Config(e.to_string()))?;

    let mut lengths = Vec::new();
    if total > 0.0 {
        let mut sum = 0.0;
        while sum < total {
            let l = exp.sample(&mut rng).max(params.min_segment);
            lengths.push(l);
            sum += l;
        }
        let scale = total / sum;
        lengths.iter_mut().for_each(|l| *l *= scale);
    }
    let free = params.duration - total;
    let weights: Vec<f64> = (0..=lengths.len()).map(|_| Exp1.sample(&mut rng)).collect();
    let wsum: f64 = weights.iter().sum();
    let gaps: Vec<f64> = weights.iter().map(|w| free * w / wsum).collect();

    let mut interactions = Vec::with_capacity(lengths.len());
    let mut gap_spans = Vec::with_capacity(gaps.len());
    let mut t = params.start;
    for (i, g) in gaps.iter().enumerate() {
        gap_spans.push(Interval::new(t, t + g));
        t += g;
        if let Some(&l) = lengths.get(i) {
            interactions.push(Interval::new(t, t + l));
            t += l;
        }
    }
    let apart = interactions.iter().map(|_| rng.random_bool(params.apart_probability)).collect();

    let mut silent = Vec::new();
    let mut background = Vec::new();
    let margin = 60.0;
    for gap in &gap_spans {
        let r: f64 = rng.random();
        let room = gap.len() - 2.0 * margin;
        let len = (exp.sample(&mut rng) / 3.0).clamp(30.0, room.max(30.0));
        if room < 30.0 {
            continue;
        }
        let s = gap.start + margin + rng.random_range(0.0..=(room - len));
        let iv = Interval::new(s, s + len);
        if r < params.background_speech_probability {
            background.push(iv);
        } else if r < params.background_speech_probability + params.silent_copresence_probability {
            silent.push(iv);
        }
    }

    let a = &params.audio;
    let mut speech: Vec<SpeechCarrier> = interactions
        .iter()
        .chain(&background)
        .map(|iv| SpeechCarrier {
            interval: *iv,
            f0: uniform(&mut rng, a.f0_hz),
            snr_db: uniform(&mut rng, a.snr_db),
            phases: (0..a.harmonics).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect(),
        })
        .collect();
    speech.sort_by(|x, y| x.interval.start.total_cmp(&y.interval.start));
    let noise_level = uniform(&mut rng, a.noise_level);

    let uptime = match &params.uptime {
        Some(up) => merge_intervals(up),
        None => vec![Interval::new(params.start, params.end())],
    };
    Ok(Scenario {
        seed,
        params: params.clone(),
        interactions,
        apart,
        silent_copresence: silent,
        background_speech: background,
        speech,
        noise_level,
        uptime,
    })
}

fn inside(intervals: &[Interval], t: f64) -> bool {
    intervals.iter().any(|i| t >= i.start && t < i.end)
}

impl Scenario {
    pub fn start(&self) -> f64 {
        self.params.start
    }

    pub fn end(&self) -> f64 {
        self.params.end()
    }

    /// Whole seconds covered by the scenario.
    pub fn seconds(&self) -> u64 {
        self.params.duration.ceil() as u64
    }

    pub fn interaction_seconds(&self) -> f64 {
        self.interactions.iter().map(Interval::len).sum()
    }

    /// Watches within range: co-located conversations and confounders.
    pub fn near_at(&self, t: f64) -> bool {
        self.interactions.iter().zip(&self.apart).any(|(i, &apart)| !apart && t >= i.start && t < i.end)
            || inside(&self.silent_copresence, t)
            || inside(&self.background_speech, t)
    }

    pub fn speech_at(&self, t: f64) -> bool {
        self.speech.iter().any(|c| c.interval.start <= t && t < c.interval.end)
    }

    pub fn in_conversation(&self, t: f64) -> bool {
        inside(&self.interactions, t)
    }

    /// One RSSI sample per second, from `start` through `end` inclusive.
    pub fn rssi_trace(&self) -> Vec<RssiSample> {
        let p = &self.params.rssi;
        let mut rng = rng_for(self.seed, STREAM_RSSI, 0);
        let noise = Normal::new(0.0, p.noise_sd).expect("validated noise_sd");
        (0..=self.seconds())
            .map(|k| {
                let t = self.start() + k as f64;
                let mean = if self.near_at(t) { p.near_mean } else { p.far_mean };
                RssiSample { timestamp: t, rssi: mean + noise.sample(&mut rng) }
            })
            .collect()
    }

    /// Audio for `[start + k, start + k + 1)`, full-scale clipped to ±1.
    pub fn audio_second(&self, k: u64) -> Vec<f64> {
        let sr = self.params.audio.sample_rate as usize;
        let t0 = self.start() + k as f64;
        let mut rng = rng_for(self.seed, STREAM_AUDIO, k);
        let active: Vec<&SpeechCarrier> = self
            .speech
            .iter()
            .filter(|c| c.interval.start < t0 + 1.0 && c.interval.end > t0)
            .collect();
        synth::render(t0, sr, &active, self.noise_level, &self.params.audio, &mut rng)
    }

    /// Heart rate at 1 Hz over `[from, to)` (absolute seconds).
    pub fn hr_trace(&self, from: f64, to: f64) -> Vec<HrSample> {
        let s = &self.params.sensors;
        let first = (from - self.start()).max(0.0).ceil() as u64;
        let last = (to - self.start()).min(self.params.duration).ceil() as u64;
        (first..last)
            .map(|k| {
                let t = self.start() + k as f64;
                let mut rng = rng_for(self.seed, STREAM_HR, k);
                let lift = if self.in_conversation(t) { s.hr_interaction_lift } else { 0.0 };
                let noise: f64 = Normal::new(0.0, s.hr_sd.max(1e-9)).expect("finite").sample(&mut rng);
                HrSample { t, bpm: s.hr_baseline + lift + noise }
            })
            .collect()
    }

    /// Wrist IMU at `imu_rate` over `[from, to)`; motion is stronger during
    /// conversation (gesturing).
    pub fn imu_trace(&self, from: f64, to: f64) -> Vec<ImuSample> {
        let s = &self.params.sensors;
        let first = (from - self.start()).max(0.0).ceil() as u64;
        let last = (to - self.start()).min(self.params.duration).ceil() as u64;
        let per_second = s.imu_rate.round().max(1.0) as u64;
        let mut out = Vec::new();
        for k in first..last {
            let mut rng = rng_for(self.seed, STREAM_IMU, k);
            let t0 = self.start() + k as f64;
            let gain = if self.in_conversation(t0) { 2.0 } else { 1.0 };
            let n = Normal::new(0.0, s.motion_sd.max(1e-9) * gain).expect("finite");
            for j in 0..per_second {
                let t = t0 + j as f64 / per_second as f64;
                out.push(ImuSample {
                    t,
                    ax: n.sample(&mut rng),
                    ay: n.sample(&mut rng),
                    az: 9.80665 + n.sample(&mut rng),
                    gx: 0.1 * n.sample(&mut rng),
                    gy: 0.1 * n.sample(&mut rng),
                    gz: 0.1 * n.sample(&mut rng),
                });
            }
        }
        out
    }
}

//! Tone-stack "speech" over white noise.

use std::f64::consts::TAU;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::AudioParams;
use crate::trigger::Interval;

/// A voiced interval: harmonics of `f0` with 1/h amplitudes, amplitude
/// modulated, mixed at `snr_db` over the scenario's noise floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechCarrier {
    pub interval: Interval,
    pub f0: f64,
    pub snr_db: f64,
    pub phases: Vec<f64>,
}

/// Mean power of the unit-amplitude modulated stack.
pub fn tone_stack_power(harmonics: usize, am_depth: f64) -> f64 {
    let tones: f64 = (1..=harmonics).map(|h| 0.5 / (h * h) as f64).sum();
    tones * (1.0 + 0.5 * am_depth * am_depth) / ((1.0 + am_depth) * (1.0 + am_depth))
}

impl SpeechCarrier {
    pub(crate) fn amplitude(&self, noise_level: f64, p: &AudioParams) -> f64 {
        let target = noise_level * noise_level * 10f64.powf(self.snr_db / 10.0);
        (target / tone_stack_power(self.phases.len(), p.am_depth)).sqrt()
    }

    pub(crate) fn sample(&self, t: f64, amp: f64, p: &AudioParams) -> f64 {
        let env = (1.0 + p.am_depth * (TAU * p.am_hz * t).sin()) / (1.0 + p.am_depth);
        let tones: f64 = self
            .phases
            .iter()
            .enumerate()
            .map(|(i, ph)| {
                let h = (i + 1) as f64;
                (TAU * h * self.f0 * t + ph).sin() / h
            })
            .sum();
        amp * env * tones
    }
}

/// `sr` samples starting at absolute time `t0`.
pub(crate) fn render(
    t0: f64,
    sr: usize,
    carriers: &[&SpeechCarrier],
    noise_level: f64,
    p: &AudioParams,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let noise = Normal::new(0.0, noise_level).expect("validated noise level");
    let amps: Vec<f64> = carriers.iter().map(|c| c.amplitude(noise_level, p)).collect();
    (0..sr)
        .map(|n| {
            let t = t0 + n as f64 / sr as f64;
            let mut x = noise.sample(rng);
            for (c, &a) in carriers.iter().zip(&amps) {
                if c.interval.start <= t && t < c.interval.end {
                    x += c.sample(t, a, p);
                }
            }
            x.clamp(-1.0, 1.0)
        })
        .collect()
}

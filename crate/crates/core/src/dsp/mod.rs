//! Audio front end: framing, Hamming window, power spectrum, mel filterbank
//! and DCT-II cepstra, in batch and streaming form.

mod fft;
mod io;
mod mel;
mod stream;
mod wav;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;

pub use fft::Fft;
pub use io::{write_features_csv, write_features_jsonl, FeatureFormat};
pub use mel::{hz_to_mel, mel_to_hz, MelFilterbank};
pub use stream::StreamingMfcc;
pub use wav::{encode_wav, read_wav, read_wav_bytes, write_wav, WavInfo};

/// Mono audio with samples normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if let Some(pos) = samples
            .iter()
            .position(|s| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(Error::Config(format!(
                "sample {pos} is outside [-1, 1]: {}",
                samples[pos]
            )));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate,
        })
    }

    /// Signed 16-bit PCM, scaled by 1/32768.
    pub fn from_pcm_i16(pcm: &[i16], sample_rate: u32) -> Result<Self> {
        Self::new(pcm.iter().map(|&s| pcm_to_f64(s)).collect(), sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[inline]
pub fn pcm_to_f64(s: i16) -> f64 {
    s as f64 / 32768.0
}

/// Front-end parameters. Defaults are the common 16 kHz speech setup:
/// 25 ms frames, 10 ms hop, 512-point FFT, 26 filters, 13 coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfccConfig {
    pub sample_rate: u32,
    pub frame_length: usize,
    pub hop_length: usize,
    pub fft_size: usize,
    pub num_mel_filters: usize,
    pub num_coefficients: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            sample_rate: 16_000,
            frame_length: 400,
            hop_length: 160,
            fft_size: 512,
            num_mel_filters: 26,
            num_coefficients: 13,
            fmin: 50.0,
            fmax: 8_000.0,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.sample_rate == 0 {
            return fail("sample_rate must be positive".into());
        }
        if self.hop_length == 0 || self.hop_length > self.frame_length {
            return fail(format!(
                "need 0 < hop_length <= frame_length, got hop {} frame {}",
                self.hop_length, self.frame_length
            ));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.frame_length {
            return fail(format!(
                "fft_size must be a power of two >= frame_length, got {}",
                self.fft_size
            ));
        }
        if self.num_coefficients == 0 || self.num_coefficients > self.num_mel_filters {
            return fail(format!(
                "need 1 <= num_coefficients <= num_mel_filters, got {} and {}",
                self.num_coefficients, self.num_mel_filters
            ));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= nyquist) {
            return fail(format!(
                "need 0 <= fmin < fmax <= {nyquist} Hz, got fmin {} fmax {}",
                self.fmin, self.fmax
            ));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return fail(format!("log_floor must be positive, got {}", self.log_floor));
        }
        Ok(())
    }

    pub fn hop_seconds(&self) -> f64 {
        self.hop_length as f64 / self.sample_rate as f64
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of whole frames in a signal of `n` samples.
    pub fn frame_count(&self, n: usize) -> usize {
        if n < self.frame_length {
            0
        } else {
            (n - self.frame_length) / self.hop_length + 1
        }
    }
}

/// One frame's features, stamped with its position in the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub frame_index: u64,
    /// Frame start, seconds from stream start.
    pub timestamp: f64,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Splits the signal into overlapping frames; a trailing partial frame is
/// dropped.
pub fn frame_signal<'a>(audio: &'a AudioBuffer, config: &MfccConfig) -> Result<Vec<&'a [f64]>> {
    config.validate()?;
    let count = config.frame_count(audio.len());
    Ok((0..count)
        .map(|k| {
            let start = k * config.hop_length;
            &audio.samples[start..start + config.frame_length]
        })
        .collect())
}

/// Symmetric Hamming window, `0.54 - 0.46 cos(2πn/(L-1))`.
pub fn hamming_window(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
        .collect()
}

pub fn apply_window(frame: &[f64], window: &[f64]) -> Vec<f64> {
    assert_eq!(frame.len(), window.len(), "frame/window length mismatch");
    frame.iter().zip(window).map(|(x, w)| x * w).collect()
}

/// Power spectrum of `frame` zero-padded to `fft_size`; `fft_size/2 + 1` bins.
pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Result<Vec<f64>> {
    Ok(Fft::new(fft_size)?.power_spectrum(frame))
}

/// Orthonormal DCT-II basis, rows `0..num_coefficients` of an `m`-point transform.
fn dct_table(m: usize, num_coefficients: usize) -> Vec<Vec<f64>> {
    let m_f = m as f64;
    (0..num_coefficients)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / m_f).sqrt()
            } else {
                (2.0 / m_f).sqrt()
            };
            (0..m)
                .map(|n| scale * (PI * k as f64 * (2.0 * n as f64 + 1.0) / (2.0 * m_f)).cos())
                .collect()
        })
        .collect()
}

/// Log mel energies of a power spectrum, floored at `log_floor`.
pub fn log_mel_energies(spectrum: &[f64], filterbank: &MelFilterbank, log_floor: f64) -> Vec<f64> {
    filterbank
        .apply(spectrum)
        .into_iter()
        .map(|e| e.max(log_floor).ln())
        .collect()
}

/// Reusable MFCC pipeline with the window, FFT plan, filterbank and DCT
/// basis precomputed.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    config: MfccConfig,
    window: Vec<f64>,
    fft: Fft,
    filterbank: MelFilterbank,
    dct: Vec<Vec<f64>>,
}

impl MfccExtractor {
    pub fn new(config: MfccConfig) -> Result<Self> {
        config.validate()?;
        let filterbank = MelFilterbank::new(&config)?;
        Ok(MfccExtractor {
            window: hamming_window(config.frame_length),
            fft: Fft::new(config.fft_size)?,
            dct: dct_table(config.num_mel_filters, config.num_coefficients),
            filterbank,
            config,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Power spectrum of the windowed frame.
    pub fn frame_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        self.fft.power_spectrum(&apply_window(frame, &self.window))
    }

    /// Cepstral coefficients of one raw (unwindowed) frame.
    pub fn coefficients(&self, frame: &[f64]) -> Vec<f64> {
        let spectrum = self.frame_spectrum(frame);
        let log_mel = log_mel_energies(&spectrum, &self.filterbank, self.config.log_floor);
        self.cepstrum(&log_mel)
    }

    /// Truncated orthonormal DCT-II of log mel energies.
    pub fn cepstrum(&self, log_mel: &[f64]) -> Vec<f64> {
        self.dct
            .iter()
            .map(|row| row.iter().zip(log_mel).map(|(b, x)| b * x).sum())
            .collect()
    }

    pub fn feature_vector(&self, frame_index: u64, frame: &[f64]) -> FeatureVector {
        FeatureVector {
            frame_index,
            timestamp: frame_index as f64 * self.config.hop_seconds(),
            values: self.coefficients(frame),
        }
    }

    /// Batch extraction over the whole buffer.
    pub fn extract(&self, audio: &AudioBuffer) -> Result<Vec<FeatureVector>> {
        self.extract_with(audio, Execution::default())
    }

    pub fn extract_with(&self, audio: &AudioBuffer, exec: Execution) -> Result<Vec<FeatureVector>> {
        self.check_rate(audio)?;
        Ok(self.extract_samples(audio.samples(), exec))
    }

    pub(crate) fn extract_samples(&self, samples: &[f64], exec: Execution) -> Vec<FeatureVector> {
        let count = self.config.frame_count(samples.len());
        let hop = self.config.hop_length;
        let len = self.config.frame_length;
        exec.map_range(count, |k| {
            self.feature_vector(k as u64, &samples[k * hop..k * hop + len])
        })
    }

    pub fn check_rate(&self, audio: &AudioBuffer) -> Result<()> {
        if audio.sample_rate() != self.config.sample_rate {
            return Err(Error::Config(format!(
                "audio sample rate {} Hz does not match configured {} Hz (resampling is not supported)",
                audio.sample_rate(),
                self.config.sample_rate
            )));
        }
        Ok(())
    }

    pub fn into_stream(self) -> StreamingMfcc {
        StreamingMfcc::new(Arc::new(self))
    }
}

/// Mean power of a frame in natural-log units, floored at 1e-10 so silence
/// stays finite.
pub fn frame_log_energy(frame: &[f64]) -> f64 {
    if frame.is_empty() {
        return 1e-10f64.ln();
    }
    let power = frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64;
    (power + 1e-10).ln()
}

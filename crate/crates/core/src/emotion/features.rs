//! Per-session feature functionals for heart rate, motion and speech.

use serde::{Deserialize, Serialize};

use super::{Modality, ModalityFeatures};
use crate::dsp::FeatureVector;
use crate::error::{Error, Result};
use crate::vad::SpeechSegment;

/// Plausible heart-rate range; samples outside are dropped on cleaning.
pub const BPM_RANGE: (f64, f64) = (20.0, 250.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrSample {
    pub t: f64,
    pub bpm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HrSeries {
    samples: Vec<HrSample>,
}

impl HrSeries {
    /// Keeps samples with `bpm` strictly inside [`BPM_RANGE`]; timestamps must
    /// be strictly increasing.
    pub fn new(samples: Vec<HrSample>) -> Result<Self> {
        check_increasing(samples.iter().map(|s| s.t), "heart rate")?;
        let samples = samples
            .into_iter()
            .filter(|s| s.bpm.is_finite() && s.bpm > BPM_RANGE.0 && s.bpm < BPM_RANGE.1)
            .collect();
        Ok(HrSeries { samples })
    }

    pub fn samples(&self) -> &[HrSample] {
        &self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
}

impl ImuSample {
    fn axes(&self) -> [f64; 6] {
        [self.ax, self.ay, self.az, self.gx, self.gy, self.gz]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImuSeries {
    samples: Vec<ImuSample>,
}

impl ImuSeries {
    pub fn new(samples: Vec<ImuSample>) -> Result<Self> {
        check_increasing(samples.iter().map(|s| s.t), "IMU")?;
        if samples.iter().any(|s| s.axes().iter().any(|v| !v.is_finite())) {
            return Err(Error::Stream("IMU sample has a non-finite value".into()));
        }
        Ok(ImuSeries { samples })
    }

    pub fn samples(&self) -> &[ImuSample] {
        &self.samples
    }
}

fn check_increasing(ts: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for t in ts {
        if !t.is_finite() || t <= prev {
            return Err(Error::Stream(format!(
                "{what} timestamps must be finite and strictly increasing ({t} after {prev})"
            )));
        }
        prev = t;
    }
    Ok(())
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub(crate) fn sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Least-squares slope and intercept of `ys` against `ts`.
pub(crate) fn linear_fit(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let tm = mean(ts);
    let ym = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, y) in ts.iter().zip(ys) {
        sxy += (t - tm) * (y - ym);
        sxx += (t - tm) * (t - tm);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, ym - slope * tm)
}

/// Percentile by linear interpolation between closest ranks, `p` in [0, 1].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Sign changes of the linearly detrended series, per sample step.
/// Residuals within rounding noise of zero carry no sign.
fn detrended_zero_crossing_rate(ts: &[f64], ys: &[f64]) -> f64 {
    let (slope, intercept) = linear_fit(ts, ys);
    let scale = ys.iter().fold(1.0f64, |m, y| m.max(y.abs()));
    let eps = 1e-9 * scale;
    let mut crossings = 0usize;
    let mut last_sign = 0i8;
    for (t, y) in ts.iter().zip(ys) {
        let r = y - (slope * t + intercept);
        let sign = if r > eps {
            1
        } else if r < -eps {
            -1
        } else {
            0
        };
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                crossings += 1;
            }
            last_sign = sign;
        }
    }
    crossings as f64 / (ys.len() - 1) as f64
}

pub const PHYSIO_NAMES: [&str; 5] = ["hr_mean", "hr_sd", "hr_min", "hr_max", "hr_slope"];

/// Mean, sd, min, max and least-squares slope (bpm/s) of the cleaned series.
pub fn physio_features(hr: &HrSeries) -> Result<ModalityFeatures> {
    if hr.samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "heart rate needs >= 2 valid samples, got {}",
            hr.samples.len()
        )));
    }
    let ts: Vec<f64> = hr.samples.iter().map(|s| s.t).collect();
    let bpm: Vec<f64> = hr.samples.iter().map(|s| s.bpm).collect();
    let (slope, _) = linear_fit(&ts, &bpm);
    let values = vec![
        mean(&bpm),
        sd(&bpm),
        bpm.iter().copied().fold(f64::INFINITY, f64::min),
        bpm.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        slope,
    ];
    ModalityFeatures::new(Modality::Physio, PHYSIO_NAMES.iter().map(|s| s.to_string()).collect(), values)
}

pub fn movement_feature_names() -> Vec<String> {
    let mut names = Vec::new();
    for axis in ["acc_x", "acc_y", "acc_z", "gyr_x", "gyr_y", "gyr_z"] {
        names.push(format!("{axis}_mean"));
        names.push(format!("{axis}_sd"));
    }
    for sensor in ["acc", "gyr"] {
        names.push(format!("{sensor}_mag_mean"));
        names.push(format!("{sensor}_mag_sd"));
        names.push(format!("{sensor}_mag_zcr"));
    }
    names
}

/// Per-axis mean/sd, then for accelerometer and gyroscope magnitudes the
/// mean, sd and zero-crossing rate of the detrended magnitude.
pub fn movement_features(imu: &ImuSeries) -> Result<ModalityFeatures> {
    let n = imu.samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("IMU needs >= 2 samples, got {n}")));
    }
    let ts: Vec<f64> = imu.samples.iter().map(|s| s.t).collect();
    let mut values = Vec::with_capacity(18);
    for axis in 0..6 {
        let col: Vec<f64> = imu.samples.iter().map(|s| s.axes()[axis]).collect();
        values.push(mean(&col));
        values.push(sd(&col));
    }
    for offset in [0, 3] {
        let mag: Vec<f64> = imu
            .samples
            .iter()
            .map(|s| {
                let a = s.axes();
                (a[offset].powi(2) + a[offset + 1].powi(2) + a[offset + 2].powi(2)).sqrt()
            })
            .collect();
        values.push(mean(&mag));
        values.push(sd(&mag));
        values.push(detrended_zero_crossing_rate(&ts, &mag));
    }
    ModalityFeatures::new(Modality::Movement, movement_feature_names(), values)
}

pub fn acoustic_feature_names(num_coefficients: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(num_coefficients * 4 + 1);
    for stat in ["mean", "sd", "p10", "p90"] {
        for k in 0..num_coefficients {
            names.push(format!("mfcc{k}_{stat}"));
        }
    }
    names.push("speech_ratio".into());
    names
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticFeatures {
    /// Absent when no frame falls inside a speech segment.
    pub functionals: Option<ModalityFeatures>,
    pub speech_ratio: f64,
}

/// Functionals of MFCC frames whose start time falls inside a speech
/// segment: per-coefficient mean, sd, 10th and 90th percentile, plus the
/// fraction of frames that are speech.
pub fn acoustic_features(frames: &[FeatureVector], segments: &[SpeechSegment]) -> Result<AcousticFeatures> {
    let speech: Vec<&FeatureVector> = frames
        .iter()
        .filter(|f| segments.iter().any(|s| s.contains(f.timestamp)))
        .collect();
    let speech_ratio = if frames.is_empty() {
        0.0
    } else {
        speech.len() as f64 / frames.len() as f64
    };
    if speech.is_empty() {
        return Ok(AcousticFeatures {
            functionals: None,
            speech_ratio,
        });
    }
    let dim = speech[0].dim();
    if speech.iter().any(|f| f.dim() != dim) {
        return Err(Error::Schema("MFCC frames have differing dimensions".into()));
    }
    let mut stats: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(dim)).collect();
    for k in 0..dim {
        let mut col: Vec<f64> = speech.iter().map(|f| f.values[k]).collect();
        stats[0].push(mean(&col));
        stats[1].push(sd(&col));
        col.sort_by(f64::total_cmp);
        stats[2].push(percentile(&col, 0.1));
        stats[3].push(percentile(&col, 0.9));
    }
    let mut values: Vec<f64> = stats.into_iter().flatten().collect();
    values.push(speech_ratio);
    Ok(AcousticFeatures {
        functionals: Some(ModalityFeatures::new(
            Modality::Acoustic,
            acoustic_feature_names(dim),
            values,
        )?),
        speech_ratio,
    })
}

use serde::{Deserialize, Serialize};

use super::MfccConfig;
use crate::error::{Error, Result};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters over FFT bins, centers equally spaced in mel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelFilterbank {
    filters: Vec<Vec<f64>>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(config: &MfccConfig) -> Result<Self> {
        config.validate()?;
        let nyquist = config.sample_rate as f64 / 2.0;
        if config.fmax > nyquist {
            return Err(Error::Config(format!(
                "fmax {} Hz exceeds Nyquist {nyquist} Hz",
                config.fmax
            )));
        }
        let m = config.num_mel_filters;
        let lo = hz_to_mel(config.fmin);
        let hi = hz_to_mel(config.fmax);
        let edges: Vec<f64> = (0..m + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (m + 1) as f64))
            .collect();
        let bin_hz = config.sample_rate as f64 / config.fft_size as f64;
        let num_bins = config.num_bins();

        let mut filters = Vec::with_capacity(m);
        for j in 0..m {
            let (left, center, right) = (edges[j], edges[j + 1], edges[j + 2]);
            let row: Vec<f64> = (0..num_bins)
                .map(|b| {
                    let f = b as f64 * bin_hz;
                    if f > left && f <= center {
                        (f - left) / (center - left)
                    } else if f > center && f < right {
                        (right - f) / (right - center)
                    } else {
                        0.0
                    }
                })
                .collect();
            if !row.iter().any(|&w| w > 0.0) {
                return Err(Error::Config(format!(
                    "mel filter {j} ({left:.1}-{right:.1} Hz) covers no FFT bin; \
                     use fewer filters or a larger fft_size"
                )));
            }
            filters.push(row);
        }
        Ok(MelFilterbank {
            filters,
            centers_hz: edges[1..=m].to_vec(),
        })
    }

    pub fn filters(&self) -> &[Vec<f64>] {
        &self.filters
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    /// Filter energies `F · spectrum`.
    pub fn apply(&self, spectrum: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|row| row.iter().zip(spectrum).map(|(w, p)| w * p).sum())
            .collect()
    }
}

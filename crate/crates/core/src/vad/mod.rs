//! Linear-SVM voice activity detection over MFCC frames.

mod baseline;
mod io;
mod persist;
mod smooth;
mod train;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dsp::{AudioBuffer, FeatureVector, MfccExtractor};
use crate::error::{Error, Result};
use crate::par::Execution;

pub use baseline::{best_energy_threshold, energy_baseline, EnergyThreshold};
pub use io::{read_labeled_csv, write_labeled_csv};
pub use persist::{load_model, model_from_json, model_to_json, save_model};
pub use smooth::{smooth, HysteresisConfig, HysteresisSmoother, SegmentEdge, SpeechSegment};
pub use train::{train_linear_svm, LabeledSet, SvmHyper, TrainingReport};

/// Standard deviations below this are treated as constant features.
pub const MIN_STD: f64 = 1e-12;

/// Linear decision function over z-normalized features:
/// `weights · ((x - mean) / std) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    weights: Vec<f64>,
    bias: f64,
    mean: Vec<f64>,
    std: Vec<f64>,
    #[serde(default)]
    metadata: BTreeMap<String, serde_json::Value>,
}

impl LinearSvmModel {
    pub fn new(weights: Vec<f64>, bias: f64, mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        let dim = weights.len();
        if mean.len() != dim || std.len() != dim {
            return Err(Error::Model(format!(
                "weights/mean/std lengths differ: {}/{}/{}",
                dim,
                mean.len(),
                std.len()
            )));
        }
        let all_finite = weights
            .iter()
            .chain(&mean)
            .chain(&std)
            .chain(std::iter::once(&bias))
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Model("model parameters must be finite".into()));
        }
        let std = std
            .into_iter()
            .map(|s| if s.abs() < MIN_STD || s < 0.0 { 1.0 } else { s })
            .collect();
        Ok(LinearSvmModel {
            weights,
            bias,
            mean,
            std,
            metadata: BTreeMap::new(),
        })
    }

    /// A model scoring raw features (`mean = 0`, `std = 1`).
    pub fn unnormalized(weights: Vec<f64>, bias: f64) -> Result<Self> {
        let dim = weights.len();
        Self::new(weights, bias, vec![0.0; dim], vec![1.0; dim])
    }

    pub fn with_metadata(mut self, metadata: BTreeMap<String, serde_json::Value>) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn metadata(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.metadata
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Multiplies weights and bias by `factor`; the decision rule is unchanged
    /// for any `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        LinearSvmModel {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            bias: self.bias * factor,
            ..self.clone()
        }
    }

    pub fn decision_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Model(format!(
                "feature dimension {} does not match model dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let mut score = self.bias;
        for (((v, w), m), sd) in x.iter().zip(&self.weights).zip(&self.mean).zip(&self.std) {
            score += w * ((v - m) / sd);
        }
        Ok(score)
    }

    pub fn decide(&self, feature: &FeatureVector) -> Result<VadDecision> {
        let score = self.decision_score(&feature.values)?;
        Ok(VadDecision {
            frame_index: feature.frame_index,
            score,
            label: classify(score)?,
        })
    }

    pub fn decide_all(&self, features: &[FeatureVector]) -> Result<Vec<VadDecision>> {
        features.iter().map(|f| self.decide(f)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VadLabel {
    Speech,
    NonSpeech,
}

impl VadLabel {
    pub fn is_speech(self) -> bool {
        self == VadLabel::Speech
    }

    /// `+1` for speech, `-1` otherwise.
    pub fn sign(self) -> i8 {
        if self.is_speech() {
            1
        } else {
            -1
        }
    }
}

/// Speech iff `score > 0`; a zero score is non-speech.
pub fn classify(score: f64) -> Result<VadLabel> {
    if score.is_nan() {
        return Err(Error::Model("decision score is NaN".into()));
    }
    Ok(if score > 0.0 {
        VadLabel::Speech
    } else {
        VadLabel::NonSpeech
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VadDecision {
    pub frame_index: u64,
    pub score: f64,
    pub label: VadLabel,
}

/// Batch pipeline over a whole recording: MFCC frames, per-frame SVM
/// decisions, then hysteresis smoothing into segments.
pub fn detect_speech(
    audio: &AudioBuffer,
    extractor: &MfccExtractor,
    model: &LinearSvmModel,
    hysteresis: &HysteresisConfig,
    exec: Execution,
) -> Result<Vec<SpeechSegment>> {
    let frames = extractor.extract_with(audio, exec)?;
    let decisions = model.decide_all(&frames)?;
    smooth(&decisions, hysteresis, extractor.config().hop_seconds())
}

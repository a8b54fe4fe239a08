//! Multimodal feature functionals and valence/arousal classification.

mod features;
mod forest;
pub mod io;
mod metrics;
mod peak_end;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::vad::{classify, train_linear_svm, LabeledSet, LinearSvmModel, SvmHyper};

pub use features::{
    acoustic_feature_names, acoustic_features, movement_feature_names, movement_features, percentile,
    physio_features, AcousticFeatures, HrSample, HrSeries, ImuSample, ImuSeries, BPM_RANGE, PHYSIO_NAMES,
};
pub use forest::{
    train_random_forest, train_random_forest_with, DecisionTree, ForestHyper, Node, RandomForestModel,
};
pub use metrics::{balanced_accuracy, per_class_recall};
pub use peak_end::{peak_end_select, PeakEnd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Physio,
    Movement,
    Acoustic,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Physio, Modality::Movement, Modality::Acoustic];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Physio => "physio",
            Modality::Movement => "movement",
            Modality::Acoustic => "acoustic",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named, finite feature values of one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityFeatures {
    modality: Modality,
    names: Vec<String>,
    values: Vec<f64>,
}

impl ModalityFeatures {
    pub fn new(modality: Modality, names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::Schema(format!(
                "{modality}: {} names for {} values",
                names.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Schema(format!("{modality}.{} is not finite", names[i])));
        }
        Ok(ModalityFeatures { modality, names, values })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Features of one recording session. A modality that could not be
/// computed is `None`, never zero-filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub session_id: String,
    pub physio: Option<ModalityFeatures>,
    pub movement: Option<ModalityFeatures>,
    pub acoustic: Option<ModalityFeatures>,
}

impl FeatureSet {
    pub fn new(session_id: impl Into<String>) -> Self {
        FeatureSet {
            session_id: session_id.into(),
            physio: None,
            movement: None,
            acoustic: None,
        }
    }

    pub fn modality(&self, m: Modality) -> Option<&ModalityFeatures> {
        match m {
            Modality::Physio => self.physio.as_ref(),
            Modality::Movement => self.movement.as_ref(),
            Modality::Acoustic => self.acoustic.as_ref(),
        }
    }

    fn slot_mut(&mut self, m: Modality) -> &mut Option<ModalityFeatures> {
        match m {
            Modality::Physio => &mut self.physio,
            Modality::Movement => &mut self.movement,
            Modality::Acoustic => &mut self.acoustic,
        }
    }

    /// Stores `features` under its own modality.
    pub fn set(&mut self, features: ModalityFeatures) {
        let m = features.modality();
        *self.slot_mut(m) = Some(features);
    }

    pub fn absent(&self) -> Vec<Modality> {
        Modality::ALL.into_iter().filter(|m| self.modality(*m).is_none()).collect()
    }

    /// Concatenates the schema's modalities in order. Absent modalities and
    /// name mismatches are schema errors.
    pub fn to_vector(&self, schema: &FeatureSchema) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(schema.dim());
        for (m, names) in &schema.modalities {
            let feats = self.modality(*m).ok_or_else(|| {
                Error::Schema(format!("session {}: modality {m} is absent", self.session_id))
            })?;
            if feats.names() != names.as_slice() {
                return Err(Error::Schema(format!(
                    "session {}: {m} features do not match the model schema",
                    self.session_id
                )));
            }
            out.extend_from_slice(feats.values());
        }
        Ok(out)
    }
}

/// Ordered modalities and their feature names, fixed per model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub modalities: Vec<(Modality, Vec<String>)>,
}

impl FeatureSchema {
    /// Physio, movement and acoustic functionals for `num_coefficients` MFCCs.
    pub fn standard(num_coefficients: usize) -> Self {
        FeatureSchema {
            modalities: vec![
                (Modality::Physio, PHYSIO_NAMES.iter().map(|s| s.to_string()).collect()),
                (Modality::Movement, movement_feature_names()),
                (Modality::Acoustic, acoustic_feature_names(num_coefficients)),
            ],
        }
    }

    /// Schema of whatever modalities `set` carries, in canonical order.
    pub fn from_set(set: &FeatureSet) -> Self {
        FeatureSchema {
            modalities: Modality::ALL
                .into_iter()
                .filter_map(|m| set.modality(m).map(|f| (m, f.names().to_vec())))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.modalities.iter().map(|(_, n)| n.len()).sum()
    }

    /// Column names as `modality.feature`.
    pub fn column_names(&self) -> Vec<String> {
        self.modalities
            .iter()
            .flat_map(|(m, names)| names.iter().map(move |n| format!("{m}.{n}")))
            .collect()
    }
}

/// Fills absent modalities with training means. Only used when imputation
/// is switched on; every filled prediction is flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanImputer {
    means: Vec<(Modality, Vec<f64>)>,
}

impl MeanImputer {
    pub fn fit(sets: &[FeatureSet], schema: &FeatureSchema) -> Result<Self> {
        let mut means = Vec::new();
        for (m, names) in &schema.modalities {
            let present: Vec<&ModalityFeatures> = sets
                .iter()
                .filter_map(|s| s.modality(*m))
                .filter(|f| f.names() == names.as_slice())
                .collect();
            if present.is_empty() {
                return Err(Error::InsufficientData(format!("no session carries modality {m}")));
            }
            let n = present.len() as f64;
            let mean = (0..names.len())
                .map(|k| present.iter().map(|f| f.values()[k]).sum::<f64>() / n)
                .collect();
            means.push((*m, mean));
        }
        Ok(MeanImputer { means })
    }

    /// Returns the completed set and whether anything was filled in.
    pub fn impute(&self, set: &FeatureSet, schema: &FeatureSchema) -> Result<(FeatureSet, bool)> {
        let mut out = set.clone();
        let mut imputed = false;
        for (m, names) in &schema.modalities {
            if out.modality(*m).is_some() {
                continue;
            }
            let (_, mean) = self
                .means
                .iter()
                .find(|(mm, _)| mm == m)
                .ok_or_else(|| Error::Schema(format!("imputer has no means for {m}")))?;
            out.set(ModalityFeatures::new(*m, names.clone(), mean.clone())?);
            imputed = true;
        }
        if imputed {
            log::warn!("session {}: imputed absent modalities {:?}", set.session_id, set.absent());
        }
        Ok((out, imputed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Valence {
    Negative,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arousal {
    Low,
    High,
}

/// Two independent binary axes of the circumplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmotionLabel {
    pub valence: Valence,
    pub arousal: Arousal,
}

impl EmotionLabel {
    /// Positive valence or high arousal maps to `true`.
    pub fn on(&self, axis: Axis) -> bool {
        match axis {
            Axis::Valence => self.valence == Valence::Positive,
            Axis::Arousal => self.arousal == Arousal::High,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Valence,
    Arousal,
}

impl Axis {
    pub fn label_name(self, positive: bool) -> &'static str {
        match (self, positive) {
            (Axis::Valence, true) => "positive",
            (Axis::Valence, false) => "negative",
            (Axis::Arousal, true) => "high",
            (Axis::Arousal, false) => "low",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valence" => Ok(Axis::Valence),
            "arousal" => Ok(Axis::Arousal),
            other => Err(Error::Config(format!("unknown axis `{other}` (valence|arousal)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Svm,
    Forest,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(ModelKind::Svm),
            "forest" | "rf" => Ok(ModelKind::Forest),
            other => Err(Error::Config(format!("unknown model kind `{other}` (svm|forest)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmotionModel {
    Svm(LinearSvmModel),
    Forest(RandomForestModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionPrediction {
    pub positive: bool,
    /// SVM decision value, or fraction of positive tree votes.
    pub score: f64,
    /// True when absent modalities were mean-imputed.
    pub imputed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionClassifier {
    pub axis: Axis,
    pub schema: FeatureSchema,
    pub model: EmotionModel,
    #[serde(default)]
    pub imputer: Option<MeanImputer>,
}

impl EmotionClassifier {
    pub fn predict_vector(&self, x: &[f64]) -> Result<(bool, f64)> {
        match &self.model {
            EmotionModel::Svm(m) => {
                let score = m.decision_score(x)?;
                Ok((classify(score)?.is_speech(), score))
            }
            EmotionModel::Forest(f) => f.predict(x),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(context, e.to_string()))
    }
}

/// Classifies one session. Absent modalities are a schema error unless the
/// classifier carries an imputer.
pub fn classify_emotion(clf: &EmotionClassifier, features: &FeatureSet) -> Result<EmotionPrediction> {
    let (set, imputed) = match (&clf.imputer, features.absent().is_empty()) {
        (Some(imp), false) => imp.impute(features, &clf.schema)?,
        _ => (features.clone(), false),
    };
    let x = set.to_vector(&clf.schema)?;
    let (positive, score) = clf.predict_vector(&x)?;
    Ok(EmotionPrediction { positive, score, imputed })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmotionTrainConfig {
    pub model: ModelKind,
    pub svm: SvmHyper,
    pub forest: ForestHyper,
    /// Mean-impute absent modalities instead of rejecting them.
    pub impute: bool,
}

/// Trains one axis. Training sessions must carry every schema modality.
pub fn train_emotion_classifier(
    sets: &[FeatureSet],
    labels: &[bool],
    axis: Axis,
    schema: &FeatureSchema,
    cfg: &EmotionTrainConfig,
    exec: Execution,
) -> Result<EmotionClassifier> {
    if sets.len() != labels.len() {
        return Err(Error::Training(format!("{} sessions but {} labels", sets.len(), labels.len())));
    }
    let x = sets.iter().map(|s| s.to_vector(schema)).collect::<Result<Vec<_>>>()?;
    let model = match cfg.model {
        ModelKind::Svm => {
            let y = labels.iter().map(|&b| if b { 1 } else { -1 }).collect();
            let (m, _) = train_linear_svm(&LabeledSet::new(x, y)?, &cfg.svm)?;
            EmotionModel::Svm(m)
        }
        ModelKind::Forest => EmotionModel::Forest(train_random_forest_with(&x, labels, &cfg.forest, exec)?),
    };
    let imputer = if cfg.impute {
        Some(MeanImputer::fit(sets, schema)?)
    } else {
        None
    };
    Ok(EmotionClassifier {
        axis,
        schema: schema.clone(),
        model,
        imputer,
    })
}

/// Labels in session order; every session must have one.
pub fn align_labels(sets: &[FeatureSet], labels: &BTreeMap<String, EmotionLabel>) -> Result<Vec<EmotionLabel>> {
    sets.iter()
        .map(|s| {
            labels
                .get(&s.session_id)
                .copied()
                .ok_or_else(|| Error::Schema(format!("no label for session `{}`", s.session_id)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPrediction {
    pub session_id: String,
    pub truth: bool,
    #[serde(flatten)]
    pub prediction: EmotionPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionEvaluation {
    pub axis: Axis,
    pub sessions: usize,
    pub balanced_accuracy: f64,
    pub imputed: usize,
    pub predictions: Vec<SessionPrediction>,
}

/// Classifies every labelled session and scores the classifier's axis.
pub fn evaluate_emotion(
    clf: &EmotionClassifier,
    sets: &[FeatureSet],
    labels: &BTreeMap<String, EmotionLabel>,
) -> Result<EmotionEvaluation> {
    let truth = align_labels(sets, labels)?;
    let predictions = sets
        .iter()
        .zip(&truth)
        .map(|(s, l)| {
            Ok(SessionPrediction {
                session_id: s.session_id.clone(),
                truth: l.on(clf.axis),
                prediction: classify_emotion(clf, s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let preds: Vec<bool> = predictions.iter().map(|p| p.prediction.positive).collect();
    let ys: Vec<bool> = predictions.iter().map(|p| p.truth).collect();
    Ok(EmotionEvaluation {
        axis: clf.axis,
        sessions: predictions.len(),
        balanced_accuracy: balanced_accuracy(&preds, &ys),
        imputed: predictions.iter().filter(|p| p.prediction.imputed).count(),
        predictions,
    })
}

//! Labelled training/evaluation sets drawn from the same synthesizers as
//! the scenarios.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::synth::{render, SpeechCarrier};
use super::{rng_for, AudioParams};
use crate::dsp::{frame_log_energy, MfccConfig, MfccExtractor};
use crate::emotion::{
    acoustic_features, per_class_recall, movement_features, physio_features, Arousal, EmotionLabel, FeatureSet, HrSample, HrSeries,
    ImuSample, ImuSeries, Valence,
};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::trigger::Interval;
use crate::vad::{
    best_energy_threshold, classify, train_linear_svm, LabeledSet, LinearSvmModel, SpeechSegment, SvmHyper,
    TrainingReport,
};

const STREAM_VAD: u64 = 101;
const STREAM_EMOTION: u64 = 102;
const STREAM_XOR: u64 = 103;

/// Frame-level speech/noise examples with their log energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VadCorpus {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub log_energy: Vec<f64>,
}

impl VadCorpus {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let speech = self.labels.iter().filter(|&&l| l).count();
        (speech, self.len() - speech)
    }

    pub fn to_labeled_set(&self) -> Result<LabeledSet> {
        LabeledSet::new(self.features.clone(), self.labels.iter().map(|&l| if l { 1 } else { -1 }).collect())
    }
}

/// One-second clips, alternating speech and noise-only. Each clip draws its
/// own noise floor, SNR, pitch and phases; every frame inherits the clip
/// label.
pub fn vad_corpus(
    seed: u64,
    clips_per_class: usize,
    audio: &AudioParams,
    mfcc: &MfccConfig,
    exec: Execution,
) -> Result<VadCorpus> {
    let extractor = MfccExtractor::new(mfcc.clone())?;
    if audio.sample_rate != mfcc.sample_rate {
        return Err(Error::Config("corpus sample rate differs from the MFCC configuration".into()));
    }
    let sr = audio.sample_rate as usize;
    let clips = exec.map_range(2 * clips_per_class, |i| {
        let mut rng = rng_for(seed, STREAM_VAD, i as u64);
        let speech = i % 2 == 0;
        let noise = rng.random_range(audio.noise_level.0..=audio.noise_level.1);
        let carrier = SpeechCarrier {
            interval: Interval::new(0.0, 1.0),
            f0: rng.random_range(audio.f0_hz.0..=audio.f0_hz.1),
            snr_db: rng.random_range(audio.snr_db.0..=audio.snr_db.1),
            phases: (0..audio.harmonics).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect(),
        };
        let carriers: Vec<&SpeechCarrier> = if speech { vec![&carrier] } else { vec![] };
        let x = render(0.0, sr, &carriers, noise, audio, &mut rng);
        let count = mfcc.frame_count(x.len());
        (0..count)
            .map(|k| {
                let frame = &x[k * mfcc.hop_length..k * mfcc.hop_length + mfcc.frame_length];
                (extractor.coefficients(frame), speech, frame_log_energy(frame))
            })
            .collect::<Vec<_>>()
    });
    let mut corpus = VadCorpus { features: Vec::new(), labels: Vec::new(), log_energy: Vec::new() };
    for (f, l, e) in clips.into_iter().flatten() {
        corpus.features.push(f);
        corpus.labels.push(l);
        corpus.log_energy.push(e);
    }
    Ok(corpus)
}

/// The reference detector: a linear SVM on a 40+40 clip corpus from `seed`.
pub fn train_default_vad(
    seed: u64,
    audio: &AudioParams,
    mfcc: &MfccConfig,
    hyper: &SvmHyper,
    exec: Execution,
) -> Result<(LinearSvmModel, TrainingReport)> {
    let corpus = vad_corpus(seed, 40, audio, mfcc, exec)?;
    train_linear_svm(&corpus.to_labeled_set()?, hyper)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VadEvaluation {
    pub balanced_accuracy: f64,
    pub recall_speech: Option<f64>,
    pub recall_non_speech: Option<f64>,
    /// Best single log-energy threshold, tuned on the evaluation set.
    pub baseline_threshold: f64,
    pub baseline_balanced_accuracy: f64,
    pub speech_frames: usize,
    pub non_speech_frames: usize,
}

/// Scores `model` frame by frame against the corpus labels and against the
/// best-threshold energy detector.
pub fn evaluate_vad(corpus: &VadCorpus, model: &LinearSvmModel) -> Result<VadEvaluation> {
    let preds = corpus
        .features
        .iter()
        .map(|x| Ok(classify(model.decision_score(x)?)?.is_speech()))
        .collect::<Result<Vec<bool>>>()?;
    let signs: Vec<i8> = corpus.labels.iter().map(|&l| if l { 1 } else { -1 }).collect();
    let baseline = best_energy_threshold(&corpus.log_energy, &signs);
    let [neg, pos] = per_class_recall(&preds, &corpus.labels);
    let (speech, non_speech) = corpus.class_counts();
    Ok(VadEvaluation {
        balanced_accuracy: crate::emotion::balanced_accuracy(&preds, &corpus.labels),
        recall_speech: pos,
        recall_non_speech: neg,
        baseline_threshold: baseline.threshold,
        baseline_balanced_accuracy: baseline.balanced_accuracy,
        speech_frames: speech,
        non_speech_frames: non_speech,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionCorpus {
    pub sets: Vec<FeatureSet>,
    pub labels: Vec<EmotionLabel>,
}

/// Sessions with injected effects: high arousal raises heart rate by 12 bpm
/// and triples wrist motion; positive valence raises voice pitch from
/// 100–150 Hz to 180–240 Hz. Everything else is nuisance variation.
pub fn emotion_corpus(seed: u64, sessions: usize, mfcc: &MfccConfig, exec: Execution) -> Result<EmotionCorpus> {
    let extractor = MfccExtractor::new(mfcc.clone())?;
    let audio = AudioParams { sample_rate: mfcc.sample_rate, ..AudioParams::default() };
    let sr = mfcc.sample_rate as usize;
    let built = exec.map_range(sessions, |i| -> Result<(FeatureSet, EmotionLabel)> {
        let mut rng = rng_for(seed, STREAM_EMOTION, i as u64);
        let positive = rng.random_bool(0.5);
        let high = rng.random_bool(0.5);

        let base = 68.0 + Normal::new(0.0, 3.0).expect("finite").sample(&mut rng) + if high { 12.0 } else { 0.0 };
        let drift = rng.random_range(-0.02..0.02);
        let hr_noise = Normal::new(0.0, 2.0).expect("finite");
        let hr: Vec<HrSample> =
            (0..120).map(|k| HrSample { t: k as f64, bpm: base + drift * k as f64 + hr_noise.sample(&mut rng) }).collect();

        let motion = if high { 1.2 } else { 0.4 } * rng.random_range(0.8..1.2);
        let acc = Normal::new(0.0, motion).expect("finite");
        let gyr = Normal::new(0.0, 0.2 * motion).expect("finite");
        let imu: Vec<ImuSample> = (0..1200)
            .map(|k| ImuSample {
                t: k as f64 / 20.0,
                ax: acc.sample(&mut rng),
                ay: acc.sample(&mut rng),
                az: 9.80665 + acc.sample(&mut rng),
                gx: gyr.sample(&mut rng),
                gy: gyr.sample(&mut rng),
                gz: gyr.sample(&mut rng),
            })
            .collect();

        let spans = [(0.5, 3.5), (4.5, 7.5)];
        let f0 = if positive { rng.random_range(180.0..240.0) } else { rng.random_range(100.0..150.0) };
        let noise = rng.random_range(0.005..0.02);
        let carriers: Vec<SpeechCarrier> = spans
            .iter()
            .map(|&(a, b)| SpeechCarrier {
                interval: Interval::new(a, b),
                f0: f0 * rng.random_range(0.95..1.05),
                snr_db: rng.random_range(10.0..20.0),
                phases: (0..3).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect(),
            })
            .collect();
        let refs: Vec<&SpeechCarrier> = carriers.iter().collect();
        let mut x = Vec::with_capacity(8 * sr);
        for s in 0..8 {
            x.extend(render(s as f64, sr, &refs, noise, &audio, &mut rng));
        }
        let frames = extractor.extract_samples(&x, Execution::Sequential);
        let segments: Vec<SpeechSegment> = spans.iter().map(|&(start, end)| SpeechSegment { start, end }).collect();

        let mut set = FeatureSet::new(format!("session-{i:04}"));
        set.set(physio_features(&HrSeries::new(hr)?)?);
        set.set(movement_features(&ImuSeries::new(imu)?)?);
        set.acoustic = acoustic_features(&frames, &segments)?.functionals;
        let label = EmotionLabel {
            valence: if positive { Valence::Positive } else { Valence::Negative },
            arousal: if high { Arousal::High } else { Arousal::Low },
        };
        Ok((set, label))
    });
    let mut corpus = EmotionCorpus { sets: Vec::new(), labels: Vec::new() };
    for r in built {
        let (s, l) = r?;
        corpus.sets.push(s);
        corpus.labels.push(l);
    }
    Ok(corpus)
}

/// Four Gaussian-ish clusters at (±1, ±1); the label is positive where the
/// coordinates share a sign.
pub fn xor_fixture(seed: u64, per_cluster: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = rng_for(seed, STREAM_XOR, 0);
    let mut x = Vec::with_capacity(4 * per_cluster);
    let mut y = Vec::with_capacity(4 * per_cluster);
    for (cx, cy) in [(-1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (1.0, -1.0)] {
        for _ in 0..per_cluster {
            x.push(vec![cx + rng.random_range(-0.4..0.4), cy + rng.random_range(-0.4..0.4)]);
            y.push(cx * cy > 0.0);
        }
    }
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_balanced_and_deterministic() {
        let a = vad_corpus(1, 3, &AudioParams::default(), &MfccConfig::default(), Execution::Sequential).unwrap();
        let b = vad_corpus(1, 3, &AudioParams::default(), &MfccConfig::default(), Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.class_counts(), (3 * 98, 3 * 98));
    }

    #[test]
    fn oracle_and_inverted_detectors() {
        let corpus = vad_corpus(2, 10, &AudioParams::default(), &MfccConfig::default(), Execution::default()).unwrap();
        let (model, _) = train_linear_svm(&corpus.to_labeled_set().unwrap(), &SvmHyper::default()).unwrap();
        let good = evaluate_vad(&corpus, &model).unwrap();
        assert!(good.balanced_accuracy > 0.5);
        let inverted = evaluate_vad(&corpus, &model.scaled(-1.0)).unwrap();
        assert!(inverted.balanced_accuracy < 0.5);
        assert_eq!(crate::emotion::balanced_accuracy(&corpus.labels, &corpus.labels), 1.0);
    }

    #[test]
    fn emotion_corpus_has_every_modality() {
        let c = emotion_corpus(3, 6, &MfccConfig::default(), Execution::default()).unwrap();
        assert_eq!(c.sets.len(), 6);
        assert!(c.sets.iter().all(|s| s.absent().is_empty()));
        let again = emotion_corpus(3, 6, &MfccConfig::default(), Execution::Sequential).unwrap();
        assert_eq!(c, again);
    }
}

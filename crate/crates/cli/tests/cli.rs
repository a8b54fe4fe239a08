use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dyadsense_core::dsp::{encode_wav, write_features_csv, write_wav, MfccConfig, MfccExtractor};
use dyadsense_core::emotion::io::{write_feature_sets_csv, write_labels_csv};
use dyadsense_core::emotion::{Axis, EmotionClassifier, EmotionModel, FeatureSchema};
use dyadsense_core::sim::{emotion_corpus, run_battery, train_default_vad, BatteryReport, SpeechSource};
use dyadsense_core::vad::{model_to_json, LinearSvmModel};
use dyadsense_core::{Execution, PipelineConfig};

fn dyadsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyadsense")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tone_wav(dir: &Path, name: &str, seconds: f64, amplitude: f64) -> PathBuf {
    let n = (16_000.0 * seconds) as usize;
    let pcm: Vec<i16> = (0..n)
        .map(|i| (amplitude * 32767.0 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16_000.0).sin()) as i16)
        .collect();
    let path = dir.join(name);
    write_wav(&path, &pcm, 16_000).unwrap();
    path
}

#[test]
fn mfcc_one_second_is_98_frames_and_matches_module() {
    let dir = tempfile::tempdir().unwrap();
    let wav = tone_wav(dir.path(), "tone.wav", 1.0, 0.3);
    let stdout = ok(&dyadsense(&["mfcc", "--input", path_str(&wav)]));
    assert_eq!(stdout.lines().count(), 1 + 98);

    let audio = dyadsense_core::dsp::read_wav(&wav).unwrap();
    let frames = MfccExtractor::new(MfccConfig::default()).unwrap().extract(&audio).unwrap();
    let mut direct = Vec::new();
    write_features_csv(&mut direct, &frames).unwrap();
    assert_eq!(stdout.as_bytes(), direct.as_slice());

    let out = dir.path().join("out");
    ok(&dyadsense(&["mfcc", "--input", path_str(&wav), "--out", "jsonl", "--out-dir", path_str(&out)]));
    let written = std::fs::read_to_string(out.join("tone.mfcc.jsonl")).unwrap();
    assert_eq!(written.lines().count(), 98);
}

#[test]
fn non_pcm_wav_exits_2_naming_the_format() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = encode_wav(&[0i16; 1600], 16_000);
    bytes[20..22].copy_from_slice(&3u16.to_le_bytes()); // IEEE float
    let path = dir.path().join("float.wav");
    std::fs::write(&path, bytes).unwrap();
    let out = dyadsense(&["mfcc", "--input", path_str(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("format code 3"));
}

#[test]
fn missing_file_exits_2() {
    let out = dyadsense(&["mfcc", "--input", "/definitely/not/here.wav"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dyadsense(&["report", "--input", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(dyadsense(&["--no-such-flag"]).status.code(), Some(2));
    assert_eq!(dyadsense(&[]).status.code(), Some(2));
    assert_eq!(dyadsense(&["simulate", "--dump-traces"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[trigger]\nnot_a_field = 1\n").unwrap();
    assert_eq!(dyadsense(&["--config", path_str(&cfg), "simulate"]).status.code(), Some(2));
}

#[test]
fn version_prints_semver_and_config_hash() {
    let plain = ok(&dyadsense(&["--version"]));
    assert!(plain.starts_with(&format!("dyadsense {} ", env!("CARGO_PKG_VERSION"))), "{plain}");
    assert_eq!(plain, ok(&dyadsense(&["--version"])));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[trigger]\nrecording_duration = 120.0\n").unwrap();
    let changed = ok(&dyadsense(&["--config", path_str(&cfg), "--version"]));
    assert_ne!(plain, changed);
}

#[test]
fn simulate_is_byte_identical_and_matches_module() {
    let a = ok(&dyadsense(&["simulate", "--scenarios", "1", "--seed", "7"]));
    let b = ok(&dyadsense(&["simulate", "--scenarios", "1", "--seed", "7"]));
    assert_eq!(a, b);

    let cfg = PipelineConfig::default();
    let model = train_default_vad(cfg.svm.seed, &cfg.sim.audio, &cfg.mfcc, &cfg.svm, Execution::default()).unwrap().0;
    let direct = run_battery(&[7], &cfg.sim, &cfg, Some(SpeechSource::Model(&model)), Execution::default()).unwrap();
    let parsed: BatteryReport = serde_json::from_str(&a).unwrap();
    assert_eq!(parsed, direct);
}

#[test]
fn simulate_dump_traces_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&dyadsense(&[
        "simulate", "--scenarios", "2", "--seed", "3", "--oracle-speech", "--dump-traces", "--out-dir", path_str(out),
    ]));
    for seed in [3, 4] {
        for stream in ["rssi", "transitions", "events", "actions", "sessions", "hr", "segments"] {
            assert!(out.join(format!("traces/seed-{seed}/{stream}.jsonl")).exists(), "{stream}");
        }
    }
    let report_path = out.join("report.json");
    let report: BatteryReport = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.summary.scenarios, 2);

    // the dump path and the battery path agree
    let plain = ok(&dyadsense(&["simulate", "--scenarios", "2", "--seed", "3", "--oracle-speech"]));
    assert_eq!(serde_json::from_str::<BatteryReport>(&plain).unwrap(), report);

    let table = ok(&dyadsense(&["report", "--input", path_str(&report_path)]));
    assert_eq!(table, report.to_table());
    let csv = ok(&dyadsense(&["report", "--input", path_str(&report_path), "--format", "csv"]));
    assert_eq!(csv, report.to_csv());
}

#[test]
fn vad_train_matches_module_and_silence_has_no_segments() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    ok(&dyadsense(&["vad-train", "--seed", "5", "--out-dir", path_str(&out)]));
    let model_path = out.join("vad_model.json");
    let written = std::fs::read_to_string(&model_path).unwrap();

    let cfg = PipelineConfig::default();
    let svm = dyadsense_core::vad::SvmHyper { seed: 5, ..cfg.svm.clone() };
    let (direct, _) = train_default_vad(5, &cfg.sim.audio, &cfg.mfcc, &svm, Execution::default()).unwrap();
    assert_eq!(written.trim_end(), model_to_json(&direct).unwrap());

    let silence = dir.path().join("silence.wav");
    write_wav(&silence, &vec![0i16; 32_000], 16_000).unwrap();
    let segments = ok(&dyadsense(&["vad-run", "--model", path_str(&model_path), "--input", path_str(&silence)]));
    let parsed: Vec<serde_json::Value> = serde_json::from_str(&segments).unwrap();
    assert!(parsed.is_empty());
}

fn emotion_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let mfcc = MfccConfig::default();
    let corpus = emotion_corpus(4, 40, &mfcc, Execution::default()).unwrap();
    let features = dir.join("features.csv");
    let labels = dir.join("labels.csv");
    let schema = FeatureSchema::standard(mfcc.num_coefficients);
    write_feature_sets_csv(std::fs::File::create(&features).unwrap(), &schema, &corpus.sets).unwrap();
    let map: BTreeMap<_, _> = corpus.sets.iter().map(|s| s.session_id.clone()).zip(corpus.labels.iter().copied()).collect();
    write_labels_csv(std::fs::File::create(&labels).unwrap(), &map).unwrap();
    (features, labels)
}

#[test]
fn constant_predictor_scores_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let (features, labels) = emotion_fixture(dir.path());
    let schema = FeatureSchema::standard(MfccConfig::default().num_coefficients);
    let constant = EmotionClassifier {
        axis: Axis::Arousal,
        model: EmotionModel::Svm(LinearSvmModel::unnormalized(vec![0.0; schema.dim()], 1.0).unwrap()),
        schema,
        imputer: None,
    };
    let clf = dir.path().join("constant.json");
    std::fs::write(&clf, constant.to_json().unwrap()).unwrap();
    let out = ok(&dyadsense(&[
        "emotion-eval", "--features", path_str(&features), "--labels", path_str(&labels), "--classifier", path_str(&clf),
    ]));
    let eval: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(eval["balanced_accuracy"], 0.5);
    assert_eq!(eval["sessions"], 40);
}

#[test]
fn emotion_train_matches_module() {
    let dir = tempfile::tempdir().unwrap();
    let (features, labels) = emotion_fixture(dir.path());
    let out = dir.path().join("models");
    for model in ["svm", "forest"] {
        ok(&dyadsense(&[
            "emotion-train", "--features", path_str(&features), "--labels", path_str(&labels), "--axis", "valence",
            "--model", model, "--out-dir", path_str(&out),
        ]));
        let written = std::fs::read_to_string(out.join("emotion_valence.json")).unwrap();
        let clf = EmotionClassifier::from_json(&written, "cli").unwrap();

        let mfcc = MfccConfig::default();
        let corpus = emotion_corpus(4, 40, &mfcc, Execution::default()).unwrap();
        let y: Vec<bool> = corpus.labels.iter().map(|l| l.on(Axis::Valence)).collect();
        let (schema, sets) = dyadsense_core::emotion::io::read_feature_sets_csv(
            std::fs::File::open(&features).unwrap(),
            "features",
        )
        .unwrap();
        let cfg = dyadsense_core::emotion::EmotionTrainConfig { model: model.parse().unwrap(), ..Default::default() };
        let direct = dyadsense_core::emotion::train_emotion_classifier(
            &sets, &y, Axis::Valence, &schema, &cfg, Execution::default(),
        )
        .unwrap();
        assert_eq!(clf, direct, "{model}");

        let eval = ok(&dyadsense(&[
            "emotion-eval", "--features", path_str(&features), "--labels", path_str(&labels), "--classifier",
            path_str(&out.join("emotion_valence.json")),
        ]));
        let eval: serde_json::Value = serde_json::from_str(&eval).unwrap();
        assert!(eval["balanced_accuracy"].as_f64().unwrap() >= 0.9, "{model}: {eval}");
    }
}

#[test]
fn unlabelled_session_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let (features, _) = emotion_fixture(dir.path());
    let labels = dir.path().join("few.csv");
    std::fs::write(&labels, "session_id,valence,arousal\nnobody,1,0\n").unwrap();
    let out = dyadsense(&[
        "emotion-train", "--features", path_str(&features), "--labels", path_str(&labels), "--axis", "arousal",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

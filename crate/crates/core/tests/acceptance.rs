//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dyadsense_core::dsp::{MfccConfig, MfccExtractor, StreamingMfcc, AudioBuffer};
use dyadsense_core::emotion::{
    balanced_accuracy, classify_emotion, peak_end_select, train_emotion_classifier, train_random_forest, Axis,
    EmotionTrainConfig, FeatureSchema, ForestHyper, ModelKind, PeakEnd,
};
use dyadsense_core::proximity::Phase;
use dyadsense_core::sim::{
    emotion_corpus, evaluate_vad, generate_scenario, run_battery, run_simulation, train_default_vad, vad_corpus,
    xor_fixture, ScenarioParams, SpeechSource,
};
use dyadsense_core::trigger::{FsmEvent, Interval, TriggerConfig, TriggerFsm};
use dyadsense_core::vad::{load_model, save_model, train_linear_svm, LabeledSet, LinearSvmModel, SvmHyper};
use dyadsense_core::{Execution, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

// ---------------------------------------------------------------- 1

fn direct_power_spectrum(x: &[f64], n: usize) -> Vec<f64> {
    (0..=n / 2)
        .map(|b| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &v) in x.iter().enumerate() {
                let a = -2.0 * PI * (b * k) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            re * re + im * im
        })
        .collect()
}

fn direct_dct(x: &[f64], keep: usize) -> Vec<f64> {
    let m = x.len() as f64;
    (0..keep)
        .map(|k| {
            let s = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            s * x
                .iter()
                .enumerate()
                .map(|(n, v)| v * (PI * k as f64 * (2 * n + 1) as f64 / (2.0 * m)).cos())
                .sum::<f64>()
        })
        .collect()
}

fn dsp_oracles() -> Outcome {
    let cfg = MfccConfig::default();
    let ex = MfccExtractor::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let (mut spec_err, mut mfcc_err, mut parseval_err) = (0f64, 0f64, 0f64);
    for _ in 0..100 {
        let frame: Vec<f64> = (0..cfg.frame_length).map(|_| rng.random_range(-1.0..1.0)).collect();
        let windowed: Vec<f64> = frame.iter().zip(ex.window()).map(|(a, w)| a * w).collect();
        let fast = ex.frame_spectrum(&frame);
        let slow = direct_power_spectrum(&windowed, cfg.fft_size);
        let scale = slow.iter().cloned().fold(0.0, f64::max);
        for (a, b) in fast.iter().zip(&slow) {
            spec_err = spec_err.max((a - b).abs() / scale);
        }
        let n = cfg.fft_size;
        let full: f64 = slow[0] + slow[n / 2] + 2.0 * slow[1..n / 2].iter().sum::<f64>();
        let energy: f64 = n as f64 * windowed.iter().map(|v| v * v).sum::<f64>();
        parseval_err = parseval_err.max((full - energy).abs() / energy);

        let log_mel: Vec<f64> = ex
            .filterbank()
            .filters()
            .iter()
            .map(|row| row.iter().zip(&slow).map(|(w, p)| w * p).sum::<f64>().max(cfg.log_floor).ln())
            .collect();
        let oracle = direct_dct(&log_mel, cfg.num_coefficients);
        for (a, b) in ex.coefficients(&frame).iter().zip(&oracle) {
            mfcc_err = mfcc_err.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    let worst = spec_err.max(mfcc_err).max(parseval_err);
    outcome(
        worst <= 1e-6,
        format!("spectrum {spec_err:.1e}, mfcc {mfcc_err:.1e}, parseval {parseval_err:.1e} (limit 1e-6 relative)"),
    )
}

// ---------------------------------------------------------------- 2

fn stream_batch() -> Outcome {
    let cfg = MfccConfig::default();
    let ex = MfccExtractor::new(cfg.clone()).unwrap();
    let shared = std::sync::Arc::new(ex.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let mut mismatches = 0;
    let mut frames = 0;
    for _ in 0..50 {
        let n = rng.random_range(0..48_000);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let batch = ex.extract(&AudioBuffer::new(x.clone(), cfg.sample_rate).unwrap()).unwrap();
        let mut stream = StreamingMfcc::new(shared.clone());
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < n {
            let len = rng.random_range(1..=4_000).min(n - pos);
            out.extend(stream.push(&x[pos..pos + len]));
            pos += len;
        }
        frames += batch.len();
        if out != batch {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/50 signals differ ({frames} frames compared bit-for-bit)"))
}

// ---------------------------------------------------------------- 3

fn vad_quality() -> Outcome {
    let started = Instant::now();
    let cfg = PipelineConfig::default();
    let (model, _) = train_default_vad(1, &cfg.sim.audio, &cfg.mfcc, &cfg.svm, Execution::default()).unwrap();
    let test = vad_corpus(2, 30, &cfg.sim.audio, &cfg.mfcc, Execution::default()).unwrap();
    let eval = evaluate_vad(&test, &model).unwrap();
    let elapsed = started.elapsed();
    let pass = eval.speech_frames >= 2000
        && eval.non_speech_frames >= 2000
        && eval.balanced_accuracy >= 0.90
        && eval.balanced_accuracy > eval.baseline_balanced_accuracy
        && within(elapsed, Duration::from_secs(60));
    outcome(
        pass,
        format!(
            "svm {:.4} vs energy baseline {:.4} (need >= 0.90 and strictly greater), {}+{} frames, {:.1} s (limit 60 s)",
            eval.balanced_accuracy,
            eval.baseline_balanced_accuracy,
            eval.speech_frames,
            eval.non_speech_frames,
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 4

fn fuzz_events(seed: u64, n: usize) -> Vec<FsmEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = rng.random_range(0.0..86_400.0);
    (0..n)
        .map(|_| {
            t += if rng.random_bool(0.1) { rng.random_range(0.0..3_600.0) } else { rng.random_range(0.0..10.0) };
            match rng.random_range(0..10) {
                0..=2 => FsmEvent::Proximity {
                    t,
                    phase: [Phase::Near, Phase::Far, Phase::Unknown][rng.random_range(0..3)],
                },
                3..=6 => FsmEvent::Speech { t, active: rng.random_bool(0.6) },
                7 => FsmEvent::App { t, running: rng.random_bool(0.8) },
                _ => FsmEvent::Tick { t },
            }
        })
        .collect()
}

fn fsm_fuzz() -> Outcome {
    let configs = [
        TriggerConfig::default(),
        TriggerConfig { recording_duration: 60.0, min_gap: 120.0, speech_confirm: 2.0, ..Default::default() },
    ];
    let mut problems = Vec::new();
    let mut triggers = 0;
    for seed in 0..10u64 {
        let cfg = configs[seed as usize % 2].clone();
        let events = fuzz_events(4000 + seed, 10_000);
        let mut fsm = TriggerFsm::new(cfg.clone()).unwrap();
        for e in &events {
            fsm.step(e).unwrap();
        }
        let end = events.last().unwrap().t() + cfg.recording_duration;
        fsm.finish(end).unwrap();
        let sessions = fsm.sessions();
        triggers += sessions.len();
        for w in sessions.windows(2) {
            if w[1].trigger.t_start < w[0].t_end {
                problems.push(format!("seed {seed}: overlapping sessions"));
            }
        }
        let mut slots: Vec<_> = sessions.iter().map(|s| s.trigger.slot).collect();
        slots.sort();
        if slots.windows(2).any(|w| w[0] == w[1]) {
            problems.push(format!("seed {seed}: slot triggered twice"));
        }
        if sessions.iter().any(|s| (s.t_end - s.trigger.t_start - cfg.recording_duration).abs() > 1e-9) {
            problems.push(format!("seed {seed}: wrong session length"));
        }
        let prompts = fsm.prompts();
        let completed: Vec<usize> = (0..sessions.len()).filter(|&i| sessions[i].prompt_emitted).collect();
        let mut prompted: Vec<usize> = prompts.iter().map(|p| p.session).collect();
        prompted.sort();
        let open: Vec<usize> = (0..sessions.len()).filter(|&i| !sessions[i].prompt_emitted).collect();
        if prompted != completed
            || prompts.iter().any(|p| p.t != sessions[p.session].t_end)
            || open.iter().any(|&i| i + 1 != sessions.len() || sessions[i].t_end <= end)
        {
            problems.push(format!("seed {seed}: prompt/session bijection broken"));
        }
        let again = TriggerFsm::replay(cfg.clone(), &events).unwrap();
        let mut first = fsm.into_log();
        let tail_start = first.len() - first.iter().rev().take_while(|a| a.t() > events.last().unwrap().t()).count();
        first.truncate(tail_start);
        if again != first {
            problems.push(format!("seed {seed}: replay differs"));
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("10 streams x 10000 events, {triggers} sessions, no violations")
        } else {
            problems.join("; ")
        },
    )
}

// ---------------------------------------------------------------- 5 + 6

fn trained_vad(cfg: &PipelineConfig) -> LinearSvmModel {
    train_default_vad(42, &cfg.sim.audio, &cfg.mfcc, &cfg.svm, Execution::default()).unwrap().0
}

fn trigger_quality(cfg: &PipelineConfig, model: &LinearSvmModel) -> (Outcome, Vec<f64>) {
    let started = Instant::now();
    let params = ScenarioParams { density: 0.3, ..cfg.sim.clone() };
    let seeds: Vec<u64> = (1..=50).collect();
    let battery = run_battery(&seeds, &params, cfg, Some(SpeechSource::Model(model)), Execution::default()).unwrap();
    let elapsed = started.elapsed();
    let s = &battery.summary;
    let gap = s.precision_gap;
    let pass = gap.is_some_and(|g| g >= 0.10) && within(elapsed, Duration::from_secs(300));
    let coverages = battery.scenarios.iter().map(|r| r.coverage).collect();
    (
        outcome(
            pass,
            format!(
                "precision algorithm {} vs scheduled {} -> gap {} (need >= 0.10); {} algorithm / {} scheduled triggers; {:.1} s (limit 300 s)",
                fmt(s.mean_precision_algorithm),
                fmt(s.mean_precision_scheduled),
                fmt(gap),
                s.algorithm_triggers,
                s.scheduled_triggers,
                elapsed.as_secs_f64()
            ),
        ),
        coverages,
    )
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |x| format!("{x:.4}"))
}

/// Slots whose whole window lies in one uptime interval, counted by hand.
fn slots_covered(cfg: &TriggerConfig, uptime: &[Interval]) -> usize {
    cfg.slots
        .iter()
        .filter(|s| uptime.iter().any(|u| u.start <= s.start && s.deadline <= u.end))
        .count()
}

fn coverage_mechanism(cfg: &PipelineConfig, model: &LinearSvmModel, full_uptime: &[f64]) -> Outcome {
    let full_ok = full_uptime.len() == 50 && full_uptime.iter().all(|&c| c == 1.0);
    let h = 3600.0;
    let cases = [
        vec![Interval::new(9.0 * h, 15.5 * h)],
        vec![Interval::new(10.0 * h, 21.0 * h)],
        vec![Interval::new(9.0 * h, 12.0 * h), Interval::new(18.0 * h, 21.0 * h)],
        vec![Interval::new(13.0 * h, 14.0 * h)],
    ];
    let mut problems = Vec::new();
    for (i, uptime) in cases.iter().enumerate() {
        let k = slots_covered(&cfg.trigger, uptime);
        let params = ScenarioParams { uptime: Some(uptime.clone()), ..cfg.sim.clone() };
        let scenario = generate_scenario(600 + i as u64, &params).unwrap();
        let run = run_simulation(&scenario, cfg, Some(SpeechSource::Model(model)), false).unwrap();
        let r = &run.report;
        let in_uptime = run
            .sessions
            .iter()
            .filter(|s| {
                let w = cfg.trigger.slots[s.trigger.slot.index as usize];
                uptime.iter().any(|u| u.start <= w.start && w.deadline <= u.end)
            })
            .count();
        let expect_cov = if k == 0 { 1.0 } else { in_uptime as f64 / k as f64 };
        if r.expected != k || r.coverage != expect_cov {
            problems.push(format!("case {i}: expected {} (oracle {k}), coverage {} (oracle {expect_cov})", r.expected, r.coverage));
        }
    }
    outcome(
        full_ok && problems.is_empty(),
        format!(
            "full uptime: {}/50 scenarios at exactly 1.0; partial uptime: {}",
            full_uptime.iter().filter(|&&c| c == 1.0).count(),
            if problems.is_empty() { "expected = k in 4/4 cases".to_string() } else { problems.join("; ") }
        ),
    )
}

// ---------------------------------------------------------------- 7

fn emotion_pipeline() -> Outcome {
    let started = Instant::now();
    let mfcc = MfccConfig::default();
    let train = emotion_corpus(10, 240, &mfcc, Execution::default()).unwrap();
    let test = emotion_corpus(11, 120, &mfcc, Execution::default()).unwrap();
    let schema = FeatureSchema::standard(mfcc.num_coefficients);
    let mut scores = Vec::new();
    let mut pass = true;
    for axis in [Axis::Arousal, Axis::Valence] {
        let y: Vec<bool> = train.labels.iter().map(|l| l.on(axis)).collect();
        let truth: Vec<bool> = test.labels.iter().map(|l| l.on(axis)).collect();
        for model in [ModelKind::Svm, ModelKind::Forest] {
            let cfg = EmotionTrainConfig { model, ..Default::default() };
            let clf = train_emotion_classifier(&train.sets, &y, axis, &schema, &cfg, Execution::default()).unwrap();
            let preds: Vec<bool> = test.sets.iter().map(|s| classify_emotion(&clf, s).unwrap().positive).collect();
            let ba = balanced_accuracy(&preds, &truth);
            pass &= ba >= 0.85;
            scores.push(format!("{axis:?}/{model:?} {ba:.3}").to_lowercase());
        }
    }
    let (xt, yt) = xor_fixture(20, 50);
    let (xe, ye) = xor_fixture(21, 50);
    let forest = train_random_forest(&xt, &yt, &ForestHyper::default()).unwrap();
    let rf: Vec<bool> = xe.iter().map(|r| forest.predict(r).unwrap().0).collect();
    let signs = yt.iter().map(|&b| if b { 1 } else { -1 }).collect();
    let (svm, _) = train_linear_svm(&LabeledSet::new(xt.clone(), signs).unwrap(), &SvmHyper::default()).unwrap();
    let sv: Vec<bool> = xe.iter().map(|r| svm.decision_score(r).unwrap() > 0.0).collect();
    let (rf_ba, svm_ba) = (balanced_accuracy(&rf, &ye), balanced_accuracy(&sv, &ye));
    pass &= rf_ba - svm_ba >= 0.25;
    let elapsed = started.elapsed();
    pass &= within(elapsed, Duration::from_secs(120));
    outcome(
        pass,
        format!(
            "held-out {} (need >= 0.85); xor forest {rf_ba:.3} vs svm {svm_ba:.3} (need gap >= 0.25); {:.1} s (limit 120 s)",
            scores.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 8

fn peak_end_oracle(s: &[f64]) -> PeakEnd {
    let hi = s.iter().cloned().fold(f64::MIN, f64::max);
    let lo = s.iter().cloned().fold(f64::MAX, f64::min);
    PeakEnd {
        peak_positive: s.iter().position(|&v| v == hi).unwrap(),
        peak_negative: s.iter().position(|&v| v == lo).unwrap(),
        end: s.len() - 1,
    }
}

fn peak_end_exhaustive() -> Outcome {
    let mut checked = 0;
    let mut wrong = 0;
    for len in 1..=6u32 {
        for code in 0..3usize.pow(len) {
            let mut c = code;
            let s: Vec<f64> = (0..len)
                .map(|_| {
                    let v = (c % 3) as f64 - 1.0;
                    c /= 3;
                    v
                })
                .collect();
            checked += 1;
            if peak_end_select(&s).unwrap() != peak_end_oracle(&s) {
                wrong += 1;
            }
        }
    }
    let empty_rejected = peak_end_select(&[]).is_err();
    outcome(
        wrong == 0 && empty_rejected,
        format!("{checked} sequences, {wrong} mismatches, empty input rejected: {empty_rejected}"),
    )
}

// ---------------------------------------------------------------- 9

fn random_model(rng: &mut ChaCha8Rng) -> LinearSvmModel {
    let dim = rng.random_range(1..=40);
    let wild = |rng: &mut ChaCha8Rng| -> f64 {
        match rng.random_range(0..4) {
            0 => rng.random_range(-1.0..1.0),
            1 => rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-300..300)),
            2 => f64::from_bits(rng.random_range(1..(1u64 << 52))), // subnormal
            _ => rng.random::<f64>() * 1e-3,
        }
    };
    let weights = (0..dim).map(|_| wild(rng)).collect();
    let mean = (0..dim).map(|_| wild(rng)).collect();
    let std = (0..dim).map(|_| rng.random_range(1e-6..1e6)).collect();
    let bias = wild(rng);
    let mut meta = std::collections::BTreeMap::new();
    meta.insert("seed".to_string(), serde_json::json!(rng.random::<u32>()));
    LinearSvmModel::new(weights, bias, mean, std).unwrap().with_metadata(meta)
}

fn persistence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9009);
    let mut bad = 0;
    for i in 0..100 {
        let m = random_model(&mut rng);
        let path = dir.path().join(format!("model-{i}.json"));
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let same = bits(m.weights()) == bits(back.weights())
            && m.bias().to_bits() == back.bias().to_bits()
            && bits(m.mean()) == bits(back.mean())
            && bits(m.std()) == bits(back.std())
            && m.metadata() == back.metadata();
        if !same {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{bad}/100 models changed on save/load (bit-exact comparison)"))
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let cfg = PipelineConfig::default();
    let mut results: Vec<(u32, &str, Outcome, Duration)> = Vec::new();
    let mut timed = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        results.push((n, name, o, t.elapsed()));
    };
    timed(1, "dsp oracles", &mut || {
        let t = Instant::now();
        let mut o = dsp_oracles();
        let e = t.elapsed();
        o.pass &= within(e, Duration::from_secs(10));
        o.detail += &format!(", {:.2} s (limit 10 s)", e.as_secs_f64());
        o
    });
    timed(2, "stream/batch equivalence", &mut stream_batch);
    timed(3, "vad quality", &mut vad_quality);
    timed(4, "fsm fuzz", &mut fsm_fuzz);
    let model = trained_vad(&cfg);
    let mut coverages = Vec::new();
    timed(5, "trigger quality", &mut || {
        let (o, c) = trigger_quality(&cfg, &model);
        coverages = c;
        o
    });
    timed(6, "coverage", &mut || coverage_mechanism(&cfg, &model, &coverages));
    timed(7, "emotion pipeline", &mut emotion_pipeline);
    timed(8, "peak-end", &mut peak_end_exhaustive);
    timed(9, "model persistence", &mut persistence);

    let mut failed = 0;
    for (n, name, o, e) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("criterion {n} [{name}] {tag}: {} ({:.2} s)", o.detail, e.as_secs_f64());
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

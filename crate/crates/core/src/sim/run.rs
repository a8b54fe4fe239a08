//! Second-by-second replay of a scenario through the pipeline.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{generate_scenario, BatteryReport, Scenario, ScenarioParams};
use crate::config::PipelineConfig;
use crate::dsp::{MfccExtractor, StreamingMfcc};
use crate::emotion::HrSample;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::proximity::{Phase, ProximityDetector, ProximityTransition, RssiSample};
use crate::trigger::{
    coverage, expected_slots, merge_intervals, triggers_within, Action, FsmEvent, Interval, RecordingSession,
    TriggerFsm, TriggerKind,
};
use crate::vad::{HysteresisSmoother, LinearSvmModel, SegmentEdge, SpeechSegment};

/// A recording "contains conversation" when it overlaps ground-truth
/// conversation by at least this many seconds.
pub const CONTAINMENT_SECONDS: f64 = 5.0;

/// Where speech decisions come from.
#[derive(Debug, Clone, Copy)]
pub enum SpeechSource<'a> {
    /// MFCC → linear SVM → hysteresis, duty-cycled: audio is only analysed
    /// while the watches are near and a trigger could fire.
    Model(&'a LinearSvmModel),
    /// Ground-truth speech edges, always on.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub duration: f64,
    pub interaction_seconds: f64,
    pub expected: usize,
    pub triggered_expected: usize,
    pub coverage: f64,
    pub algorithm_triggers: usize,
    pub scheduled_triggers: usize,
    pub algorithm_contained: usize,
    pub scheduled_contained: usize,
    /// Absent when no trigger of that kind fired.
    pub precision_algorithm: Option<f64>,
    pub precision_scheduled: Option<f64>,
    pub prompts: usize,
    /// Seconds of audio pushed through the detector.
    pub vad_seconds: u64,
}

/// Intermediate streams, kept only when asked for.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimTraces {
    pub rssi: Vec<RssiSample>,
    pub transitions: Vec<ProximityTransition>,
    pub segments: Vec<SpeechSegment>,
    pub events: Vec<FsmEvent>,
    pub hr: Vec<HrSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub report: SimReport,
    pub actions: Vec<Action>,
    pub sessions: Vec<RecordingSession>,
    pub traces: Option<SimTraces>,
}

struct Replay {
    fsm: TriggerFsm,
    events: Option<Vec<FsmEvent>>,
}

impl Replay {
    fn step(&mut self, event: FsmEvent) -> Result<()> {
        // detector edges may be stamped a few ms before the clock
        let t = event.t().max(self.fsm.now().unwrap_or(f64::MIN));
        let event = match event {
            FsmEvent::Proximity { phase, .. } => FsmEvent::Proximity { t, phase },
            FsmEvent::Speech { active, .. } => FsmEvent::Speech { t, active },
            FsmEvent::Tick { .. } => FsmEvent::Tick { t },
            FsmEvent::App { running, .. } => FsmEvent::App { t, running },
        };
        self.fsm.step(&event)?;
        if let Some(ev) = &mut self.events {
            ev.push(event);
        }
        Ok(())
    }
}

struct Gate {
    stream: StreamingMfcc,
    smoother: HysteresisSmoother,
}

fn uptime_edges(scenario: &Scenario) -> Vec<(f64, bool)> {
    let (start, end) = (scenario.start(), scenario.end());
    let up = merge_intervals(&scenario.uptime);
    let mut edges = Vec::new();
    if !up.iter().any(|i| i.start <= start && start < i.end) {
        edges.push((start, false));
    }
    for i in &up {
        if i.start > start && i.start <= end {
            edges.push((i.start, true));
        }
        if i.end >= start && i.end <= end {
            edges.push((i.end, false));
        }
    }
    edges
}

fn speech_edges(scenario: &Scenario) -> Vec<(f64, bool)> {
    let ivs: Vec<Interval> = scenario.speech.iter().map(|c| c.interval).collect();
    merge_intervals(&ivs).iter().flat_map(|i| [(i.start, true), (i.end, false)]).collect()
}

fn contained(session_start: f64, duration: f64, scenario: &Scenario) -> bool {
    let rec = Interval::new(session_start, session_start + duration);
    scenario.interactions.iter().map(|i| i.overlap(&rec)).sum::<f64>() >= CONTAINMENT_SECONDS
}

/// Replays `scenario` in timestamp order: one RSSI sample and one clock
/// tick per second, audio in one-second chunks. A missing speech source is
/// a configuration error.
pub fn run_simulation(
    scenario: &Scenario,
    cfg: &PipelineConfig,
    source: Option<SpeechSource<'_>>,
    keep_traces: bool,
) -> Result<SimRun> {
    let source = source.ok_or_else(|| Error::Config("simulation needs a trained VAD model".into()))?;
    cfg.validate()?;
    if scenario.params.audio.sample_rate != cfg.mfcc.sample_rate {
        return Err(Error::Config("scenario sample rate differs from the MFCC configuration".into()));
    }
    let extractor = Arc::new(MfccExtractor::new(cfg.mfcc.clone())?);
    if let SpeechSource::Model(m) = source {
        if m.dim() != cfg.mfcc.num_coefficients {
            return Err(Error::Config(format!(
                "VAD model expects {} features but MFCC produces {}",
                m.dim(),
                cfg.mfcc.num_coefficients
            )));
        }
    }
    let hop = cfg.mfcc.hop_seconds();
    let mut replay = Replay {
        fsm: TriggerFsm::new(cfg.trigger.clone())?,
        events: keep_traces.then(Vec::new),
    };
    let mut prox = ProximityDetector::new(cfg.proximity.clone())?;
    let rssi = scenario.rssi_trace();
    let mut transitions = Vec::new();
    let mut segments = Vec::new();

    let mut app = uptime_edges(scenario).into_iter().peekable();
    let mut oracle = match source {
        SpeechSource::Oracle => speech_edges(scenario),
        SpeechSource::Model(_) => Vec::new(),
    }
    .into_iter()
    .peekable();
    let mut gate: Option<Gate> = None;
    let mut vad_seconds = 0;
    let seconds = scenario.seconds();

    let emit = |edge: SegmentEdge, replay: &mut Replay, segments: &mut Vec<SpeechSegment>| match edge {
        SegmentEdge::Opened { at, .. } => replay.step(FsmEvent::Speech { t: at, active: true }),
        SegmentEdge::Closed { segment, at } => {
            segments.push(segment);
            replay.step(FsmEvent::Speech { t: at, active: false })
        }
    };

    for (k, sample) in rssi.iter().enumerate() {
        let t = sample.timestamp;
        loop {
            let next_app = app.peek().map(|e| e.0).filter(|&at| at <= t);
            let next_speech = oracle.peek().map(|e| e.0).filter(|&at| at <= t);
            match (next_app, next_speech) {
                (Some(a), s) if s.is_none_or(|s| a <= s) => {
                    let (at, running) = app.next().expect("peeked");
                    if !running {
                        if let Some(mut g) = gate.take() {
                            if let Some(e) = g.smoother.interrupt(at) {
                                emit(e, &mut replay, &mut segments)?;
                            }
                        }
                    }
                    replay.step(FsmEvent::App { t: at, running })?;
                }
                (_, Some(_)) => {
                    let (at, active) = oracle.next().expect("peeked");
                    replay.step(FsmEvent::Speech { t: at, active })?;
                }
                _ => break,
            }
        }
        replay.step(FsmEvent::Tick { t })?;
        for tr in prox.update(sample)? {
            replay.step(FsmEvent::Proximity { t: tr.t, phase: tr.to })?;
            transitions.push(tr);
        }
        if k as u64 >= seconds {
            break;
        }
        let SpeechSource::Model(model) = source else { continue };
        let listen = prox.phase() == Phase::Near && replay.fsm.is_armed(t);
        if !listen {
            if let Some(mut g) = gate.take() {
                if let Some(e) = g.smoother.interrupt(t) {
                    emit(e, &mut replay, &mut segments)?;
                }
            }
            continue;
        }
        let g = match &mut gate {
            Some(g) => g,
            None => gate.insert(Gate {
                stream: StreamingMfcc::new(extractor.clone()),
                smoother: HysteresisSmoother::with_origin(cfg.hysteresis.clone(), hop, t)?,
            }),
        };
        vad_seconds += 1;
        let frames = g.stream.push(&scenario.audio_second(k as u64));
        let mut edges = Vec::new();
        for f in &frames {
            edges.extend(g.smoother.push(&model.decide(f)?));
        }
        for e in edges {
            emit(e, &mut replay, &mut segments)?;
        }
    }
    if let Some(mut g) = gate.take() {
        if let Some(e) = g.smoother.interrupt(scenario.end()) {
            emit(e, &mut replay, &mut segments)?;
        }
    }
    // let a recording that started at the end run to completion
    replay.fsm.finish(scenario.end() + cfg.trigger.recording_duration)?;

    let triggers = replay.fsm.triggers();
    let expected = expected_slots(&cfg.trigger, &scenario.uptime);
    let triggered_expected = triggers_within(&triggers, &expected);
    let rd = cfg.trigger.recording_duration;
    let count = |kind: TriggerKind| triggers.iter().filter(|t| t.kind == kind).count();
    let hits = |kind: TriggerKind| {
        triggers
            .iter()
            .filter(|t| t.kind == kind && contained(t.t_start, rd, scenario))
            .count()
    };
    let (alg, sched) = (count(TriggerKind::Algorithm), count(TriggerKind::Scheduled));
    let (alg_hit, sched_hit) = (hits(TriggerKind::Algorithm), hits(TriggerKind::Scheduled));
    let ratio = |hit: usize, n: usize| (n > 0).then(|| hit as f64 / n as f64);
    let report = SimReport {
        seed: scenario.seed,
        duration: scenario.params.duration,
        interaction_seconds: scenario.interaction_seconds(),
        expected: expected.len(),
        triggered_expected,
        coverage: coverage(triggered_expected, expected.len()),
        algorithm_triggers: alg,
        scheduled_triggers: sched,
        algorithm_contained: alg_hit,
        scheduled_contained: sched_hit,
        precision_algorithm: ratio(alg_hit, alg),
        precision_scheduled: ratio(sched_hit, sched),
        prompts: replay.fsm.prompts().len(),
        vad_seconds,
    };
    let sessions = replay.fsm.sessions().to_vec();
    let traces = replay.events.take().map(|events| SimTraces {
        hr: scenario.hr_trace(scenario.start(), scenario.end()),
        rssi,
        transitions,
        segments,
        events,
    });
    Ok(SimRun {
        report,
        actions: replay.fsm.into_log(),
        sessions,
        traces,
    })
}

/// Generates and replays one scenario per seed, in parallel when asked.
/// Reports come back sorted by seed.
pub fn run_battery(
    seeds: &[u64],
    params: &ScenarioParams,
    cfg: &PipelineConfig,
    source: Option<SpeechSource<'_>>,
    exec: Execution,
) -> Result<BatteryReport> {
    let runs = exec.map_slice(seeds, |&seed| {
        let scenario = generate_scenario(seed, params)?;
        run_simulation(&scenario, cfg, source, false).map(|r| r.report)
    });
    Ok(BatteryReport::from_reports(runs.into_iter().collect::<Result<Vec<_>>>()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proximity::ProximityConfig;
    use crate::trigger::{Slot, TriggerConfig};

    fn quiet_params() -> ScenarioParams {
        ScenarioParams {
            density: 0.0,
            apart_probability: 0.0,
            silent_copresence_probability: 0.0,
            background_speech_probability: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn missing_model_is_config_error() {
        let s = generate_scenario(1, &ScenarioParams { duration: 60.0, ..quiet_params() }).unwrap();
        let err = run_simulation(&s, &PipelineConfig::default(), None, false).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn no_interaction_means_only_scheduled_triggers() {
        let s = generate_scenario(5, &quiet_params()).unwrap();
        let run = run_simulation(&s, &PipelineConfig::default(), Some(SpeechSource::Oracle), false).unwrap();
        let r = &run.report;
        assert_eq!(r.algorithm_triggers, 0);
        assert_eq!(r.precision_algorithm, None);
        assert_eq!(r.scheduled_triggers, 4);
        assert_eq!(r.precision_scheduled, Some(0.0));
        assert_eq!(r.coverage, 1.0);
        let starts: Vec<f64> = run.sessions.iter().map(|s| s.trigger.t_start).collect();
        assert_eq!(starts, vec![12.0 * 3600.0, 15.0 * 3600.0, 18.0 * 3600.0, 21.0 * 3600.0]);
        assert_eq!(r.prompts, 4);
    }

    /// One noiseless, co-located conversation per slot with oracle speech:
    /// every slot is triggered by the algorithm, early in its conversation.
    #[test]
    fn ideal_sensing_gives_perfect_precision() {
        let mut s = generate_scenario(2, &quiet_params()).unwrap();
        s.params.rssi.noise_sd = 0.0;
        let base = s.start();
        for slot in 0..4 {
            let a = base + slot as f64 * 10_800.0 + 1_800.0;
            s.interactions.push(Interval::new(a, a + 900.0));
            s.apart.push(false);
            s.speech.push(crate::sim::SpeechCarrier {
                interval: Interval::new(a, a + 900.0),
                f0: 150.0,
                snr_db: 10.0,
                phases: vec![0.0; 3],
            });
        }
        let run = run_simulation(&s, &PipelineConfig::default(), Some(SpeechSource::Oracle), true).unwrap();
        let r = &run.report;
        assert_eq!((r.algorithm_triggers, r.scheduled_triggers), (4, 0));
        assert_eq!(r.precision_algorithm, Some(1.0));
        assert_eq!(r.coverage, 1.0);
        // smoothed RSSI crosses -70 dBm at a + 1 and near commits at a + 3;
        // the 5th second of speech completes at a + 5
        for (slot, sess) in run.sessions.iter().enumerate() {
            let a = base + slot as f64 * 10_800.0 + 1_800.0;
            assert_eq!(sess.trigger.t_start, a + 5.0);
        }
        assert!(run.traces.unwrap().events.windows(2).all(|w| w[0].t() <= w[1].t()));
    }

    #[test]
    fn partial_uptime_counts_only_covered_slots() {
        let params = ScenarioParams {
            uptime: Some(vec![Interval::new(9.0 * 3600.0, 15.5 * 3600.0)]),
            ..quiet_params()
        };
        let s = generate_scenario(4, &params).unwrap();
        let run = run_simulation(&s, &PipelineConfig::default(), Some(SpeechSource::Oracle), false).unwrap();
        assert_eq!(run.report.expected, 2);
        assert_eq!(run.report.scheduled_triggers, 2);
        assert_eq!(run.report.coverage, 1.0);
    }

    #[test]
    fn model_dimension_is_checked() {
        let s = generate_scenario(1, &ScenarioParams { duration: 60.0, ..quiet_params() }).unwrap();
        let m = LinearSvmModel::unnormalized(vec![1.0; 3], 0.0).unwrap();
        let err = run_simulation(&s, &PipelineConfig::default(), Some(SpeechSource::Model(&m)), false).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn custom_slots_and_short_scenario() {
        let cfg = PipelineConfig {
            trigger: TriggerConfig {
                recording_duration: 60.0,
                min_gap: 60.0,
                slots: vec![Slot { start: 0.0, deadline: 600.0 }],
                ..Default::default()
            },
            proximity: ProximityConfig::default(),
            ..Default::default()
        };
        let params = ScenarioParams { start: 0.0, duration: 600.0, ..quiet_params() };
        let s = generate_scenario(9, &params).unwrap();
        let run = run_simulation(&s, &cfg, Some(SpeechSource::Oracle), false).unwrap();
        assert_eq!(run.report.scheduled_triggers, 1);
        assert_eq!(run.sessions[0].trigger.t_start, 600.0);
        assert_eq!(run.sessions[0].t_end, 660.0);
        assert!(run.sessions[0].prompt_emitted);
    }
}

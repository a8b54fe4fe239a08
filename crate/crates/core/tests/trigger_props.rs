use dyadsense_core::proximity::Phase;
use dyadsense_core::trigger::{FsmEvent, Slot, TriggerConfig, TriggerFsm, TriggerKind, SECONDS_PER_DAY};
use proptest::prelude::*;

fn config(variant: u8) -> TriggerConfig {
    match variant {
        0 => TriggerConfig::default(),
        1 => TriggerConfig {
            recording_duration: 60.0,
            min_gap: 120.0,
            speech_confirm: 2.0,
            confirm_window: 10.0,
            ..Default::default()
        },
        _ => TriggerConfig {
            recording_duration: 30.0,
            min_gap: 30.0,
            slots: (0..12).map(|h| Slot::hours(8.0 + h as f64, 9.0 + h as f64)).collect(),
            max_per_day: Some(5),
            speech_confirm: 0.0,
            confirm_window: 5.0,
        },
    }
}

fn event() -> impl Strategy<Value = (f64, u8, bool, u8)> {
    (prop_oneof![4 => 0.05f64..8.0, 1 => 60.0f64..4_000.0], 0u8..10, any::<bool>(), 0u8..3)
}

fn stream(steps: Vec<(f64, u8, bool, u8)>) -> Vec<FsmEvent> {
    let mut t = 8.5 * 3600.0;
    steps
        .into_iter()
        .map(|(dt, kind, flag, p)| {
            t += dt;
            match kind {
                0..=2 => FsmEvent::Proximity { t, phase: [Phase::Near, Phase::Far, Phase::Unknown][p as usize] },
                3..=6 => FsmEvent::Speech { t, active: flag || p == 0 },
                7 => FsmEvent::App { t, running: flag || p != 0 },
                _ => FsmEvent::Tick { t },
            }
        })
        .collect()
}

/// Independent replay of the sensor state after each event: (near, speech seconds
/// inside the confirmation window).
fn sensor_state(events: &[FsmEvent], cfg: &TriggerConfig) -> Vec<(bool, f64)> {
    let mut near = false;
    let mut open: Option<f64> = None;
    let mut closed: Vec<(f64, f64)> = Vec::new();
    events
        .iter()
        .map(|e| {
            match *e {
                FsmEvent::Proximity { phase, .. } => near = phase == Phase::Near,
                FsmEvent::Speech { t, active } => {
                    if active {
                        open.get_or_insert(t);
                    } else if let Some(a) = open.take() {
                        closed.push((a, t));
                    }
                }
                FsmEvent::App { t, running } => {
                    if !running {
                        near = false;
                        if let Some(a) = open.take() {
                            closed.push((a, t));
                        }
                    }
                }
                FsmEvent::Tick { .. } => {}
            }
            let t = e.t();
            let lo = t - cfg.confirm_window;
            let speech: f64 = closed
                .iter()
                .copied()
                .chain(open.map(|a| (a, t)))
                .map(|(a, b)| (b.min(t) - a.max(lo)).max(0.0))
                .sum();
            (near, speech)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn trigger_invariants(variant in 0u8..3, steps in prop::collection::vec(event(), 1..600)) {
        let cfg = config(variant);
        let events = stream(steps);
        let mut fsm = TriggerFsm::new(cfg.clone()).unwrap();
        for e in &events {
            fsm.step(e).unwrap();
        }
        let end = events.last().unwrap().t() + cfg.recording_duration;
        fsm.finish(end).unwrap();
        let sessions = fsm.sessions();
        let state = sensor_state(&events, &cfg);

        for w in sessions.windows(2) {
            prop_assert!(w[1].trigger.t_start >= w[0].t_end, "overlap");
        }
        let mut slots: Vec<_> = sessions.iter().map(|s| s.trigger.slot).collect();
        slots.sort();
        prop_assert!(slots.windows(2).all(|w| w[0] != w[1]), "slot reused");
        let mut days = std::collections::BTreeMap::new();
        // the cap gates algorithm triggers; deadlines always fire
        for s in sessions {
            let e = days.entry(s.trigger.slot.day).or_insert(0u32);
            if s.trigger.kind == TriggerKind::Algorithm {
                prop_assert!(*e < cfg.daily_cap(), "algorithm trigger over the daily cap");
            }
            *e += 1;
        }

        let mut prev_start: Option<f64> = None;
        for s in sessions {
            let tr = s.trigger;
            prop_assert!((s.t_end - tr.t_start - cfg.recording_duration).abs() < 1e-9);
            match tr.kind {
                TriggerKind::Scheduled => prop_assert_eq!(tr.t_start, cfg.deadline_of(tr.slot)),
                TriggerKind::Algorithm => {
                    prop_assert_eq!(cfg.slot_at(tr.t_start), Some(tr.slot));
                    if let Some(p) = prev_start {
                        prop_assert!(tr.t_start - p >= cfg.min_gap, "min_gap violated");
                    }
                    let i = events.iter().position(|e| e.t() == tr.t_start);
                    prop_assert!(i.is_some(), "algorithm trigger without an event");
                    let (near, speech) = state[i.unwrap()];
                    prop_assert!(near, "fired while not near");
                    prop_assert!(speech + 1e-9 >= cfg.speech_confirm, "fired with {} s speech", speech);
                }
            }
            prev_start = Some(tr.t_start);
        }

        let prompts = fsm.prompts();
        prop_assert_eq!(prompts.len(), sessions.iter().filter(|s| s.prompt_emitted).count());
        for p in prompts {
            prop_assert_eq!(p.t, sessions[p.session].t_end);
        }
        prop_assert!(sessions.iter().all(|s| s.prompt_emitted || s.t_end > end));

        let replayed = TriggerFsm::replay(cfg.clone(), &events).unwrap();
        prop_assert!(fsm.log().starts_with(&replayed));
    }

    #[test]
    fn silence_yields_one_scheduled_trigger_per_slot(variant in 0u8..3, days in 1u32..4) {
        let cfg = config(variant);
        let mut fsm = TriggerFsm::new(cfg.clone()).unwrap();
        let end = days as f64 * SECONDS_PER_DAY;
        let mut t = 0.0;
        while t <= end {
            fsm.step(&FsmEvent::Tick { t }).unwrap();
            t += 900.0;
        }
        let sessions = fsm.sessions();
        let per_day = cfg.slots.len();
        let scheduled = sessions.iter().filter(|s| s.trigger.kind == TriggerKind::Scheduled).count();
        prop_assert_eq!(sessions.len(), scheduled);
        prop_assert_eq!(scheduled, per_day * days as usize);
    }
}

mod common;

use classplay_core::engine::{self, Effect, Event};
use classplay_core::phase::PhaseId;
use classplay_core::protocol::Body;
use classplay_core::scenario::sample_scenario;
use common::*;

#[test]
fn compliant_session_reaches_ended_for_every_supported_size() {
    let s = sample_scenario();
    for n in 6..=36 {
        let run = drive(&s, new_session(&s, n, 7), |_, _| None);
        assert_eq!(run.state.phase, PhaseId::Ended, "n={n}");
        assert!(run.violations.is_empty(), "n={n}: {:?}", run.violations);
        assert!(run.state.fault.is_none(), "n={n}: {:?}", run.state.fault);
    }
}

#[test]
fn odd_roster_has_exactly_one_trio() {
    let s = sample_scenario();
    let run = drive(&s, new_session(&s, 21, 3), |st, _| {
        if st.phase == PhaseId::PairPuzzle {
            let trios = st
                .pairs
                .iter()
                .filter(|p| p.unit.members.len() == 3)
                .count();
            assert_eq!(trios, 1);
            assert!(st
                .pairs
                .iter()
                .all(|p| (2..=3).contains(&p.unit.members.len())));
        }
        None
    });
    assert_eq!(run.state.phase, PhaseId::Ended);
}

#[test]
fn phase_sequence_is_the_total_order() {
    let s = sample_scenario();
    let run = drive(&s, new_session(&s, 12, 1), |_, _| None);
    let phases: Vec<PhaseId> = run
        .effects
        .iter()
        .flatten()
        .filter_map(|fx| match fx {
            Effect::Broadcast {
                msg: Body::PhaseChange(pc),
            } if !pc.paused && pc.message != "Resumed" => Some(pc.phase),
            _ => None,
        })
        .fold(Vec::new(), |mut v, p| {
            if v.last() != Some(&p) {
                v.push(p);
            }
            v
        });
    assert_eq!(phases, PhaseId::ALL[1..].to_vec());
}

#[test]
fn every_phase_entry_requests_a_checkpoint() {
    let s = sample_scenario();
    let run = drive(&s, new_session(&s, 8, 2), |_, _| None);
    let checkpoints = run
        .effects
        .iter()
        .flatten()
        .filter(|fx| matches!(fx, Effect::WriteCheckpoint))
        .count();
    assert_eq!(checkpoints, PhaseId::ALL.len() - 1);
}

#[test]
fn handle_event_leaves_input_untouched() {
    let s = sample_scenario();
    let st = new_session(&s, 6, 9);
    let before = st.clone();
    let (next, fx) = engine::handle_event(
        &s,
        &st,
        &Event::Join {
            player: "s01".into(),
        },
    );
    assert_eq!(st, before);
    assert_ne!(next, st);
    assert!(!fx.is_empty());
}

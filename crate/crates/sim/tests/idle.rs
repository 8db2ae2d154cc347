use classplay_core::ids::PlayerId;
use classplay_core::phase::PhaseId;
use classplay_core::scenario::sample_scenario;
use classplay_sim::transcript::{IdleSpan, IdleStats};
use classplay_sim::{idle_metric, run_simulation, SimConfig, Transcript};

fn span(phase: PhaseId, start: u64, end: u64) -> IdleSpan {
    IdleSpan { phase, start, end }
}

#[test]
fn empty_transcript_is_all_zeros() {
    let r = idle_metric(&Transcript::default());
    assert_eq!(r.overall, IdleStats::default());
    assert!(r.per_player.is_empty());
    assert!(r.per_phase.is_empty());
}

#[test]
fn stats_match_hand_computation() {
    let mut t = Transcript::default();
    t.idle.insert(
        PlayerId::from("s01"),
        vec![
            span(PhaseId::Lobby, 0, 2000),
            span(PhaseId::PairPuzzle, 10, 40),
        ],
    );
    t.idle.insert(
        PlayerId::from("s02"),
        vec![
            span(PhaseId::PairPuzzle, 0, 0),
            span(PhaseId::PairPuzzle, 5, 105),
        ],
    );
    let r = idle_metric(&t);
    let stats = |max_ms, mean_ms, spans| IdleStats {
        max_ms,
        mean_ms,
        spans,
    };
    assert_eq!(r.overall, stats(2000, 710.0, 3));
    assert_eq!(r.per_player[&PlayerId::from("s01")], stats(2000, 1015.0, 2));
    assert_eq!(r.per_player[&PlayerId::from("s02")], stats(100, 100.0, 1));
    assert_eq!(r.per_phase[&PhaseId::Lobby], stats(2000, 2000.0, 1));
    assert_eq!(r.per_phase[&PhaseId::PairPuzzle], stats(100, 65.0, 2));
    assert!(!r.per_phase.contains_key(&PhaseId::Discussion));
}

#[test]
fn spans_sit_inside_their_phase() {
    let s = sample_scenario();
    let mut c = SimConfig::new(10, 4);
    c.profiles
        .push("s03=slow:min=20000,max=40000".parse().unwrap());
    let (t, r) = run_simulation(&s, &c).unwrap();
    assert!(r.ok(), "{r:#?}");
    assert!(
        r.idle.overall.max_ms >= 20_000,
        "others wait for the slow player: {:?}",
        r.idle.overall
    );
    for (p, spans) in &t.idle {
        for sp in spans {
            assert!(sp.start <= sp.end, "{p}: {sp:?}");
            let inside = r
                .phases
                .iter()
                .any(|ph| ph.phase == sp.phase && ph.start <= sp.start && sp.end <= ph.end);
            assert!(inside, "{p}: {sp:?} not inside a {} span", sp.phase);
        }
    }
}

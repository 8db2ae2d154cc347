use classplay_core::phase::PhaseId;
use classplay_core::protocol::{codes, decode};
use classplay_core::scenario::sample_scenario;
use classplay_sim::transcript::Dir;
use classplay_sim::{checkpoint_equivalence, run_simulation, SimConfig, TransportKind};

fn config(n: usize, seed: u64, extra: &[&str]) -> SimConfig {
    let mut c = SimConfig::new(n, seed);
    for e in extra {
        if e.contains('@') || e.starts_with("dup:") {
            c.faults.push(e.parse().unwrap());
        } else {
            c.profiles.push(e.parse().unwrap());
        }
    }
    c
}

#[test]
fn compliant_class_finishes_with_every_phase_visited() {
    let s = sample_scenario();
    let (t, r) = run_simulation(&s, &config(6, 1, &[])).unwrap();
    assert!(r.ok(), "{r:#?}");
    let phases: Vec<PhaseId> = r.phases.iter().map(|p| p.phase).collect();
    assert_eq!(phases, PhaseId::ALL.to_vec());
    assert!(r.error_codes.is_empty(), "{:?}", r.error_codes);
    // Every recorded frame is a valid wire frame.
    for e in t
        .entries
        .iter()
        .filter(|e| matches!(e.dir, Dir::In | Dir::Out))
    {
        decode(format!("{}\n", e.frame).as_bytes()).unwrap();
    }
}

#[test]
fn same_inputs_same_transcript() {
    let s = sample_scenario();
    let c = config(14, 77, &["wrong_scanner:p=0.3", "s02=slow"]);
    let (a, ra) = run_simulation(&s, &c).unwrap();
    let (b, rb) = run_simulation(&s, &c).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra.transcript_digest, rb.transcript_digest);
    let (_, other) =
        run_simulation(&s, &config(14, 78, &["wrong_scanner:p=0.3", "s02=slow"])).unwrap();
    assert_ne!(ra.transcript_digest, other.transcript_digest);
}

#[test]
fn tcp_and_in_process_agree() {
    let s = sample_scenario();
    let mut c = config(
        9,
        21,
        &["s04=wrong_scanner:p=0.5", "drop:s07@PairFormation+3000"],
    );
    let (a, ra) = run_simulation(&s, &c).unwrap();
    c.transport = TransportKind::Tcp;
    let (b, rb) = run_simulation(&s, &c).unwrap();
    assert!(rb.ok(), "{rb:#?}");
    assert_eq!(rb.transport, "tcp");
    assert_eq!(a.entries.len(), b.entries.len());
    assert_eq!(ra.transcript_digest, rb.transcript_digest);
}

#[test]
fn duplicated_frames_are_dropped() {
    let s = sample_scenario();
    let (t, r) = run_simulation(&s, &config(8, 2, &["dup:s03"])).unwrap();
    assert!(r.ok(), "{r:#?}");
    let sent = t
        .entries
        .iter()
        .filter(|e| e.dir == Dir::In && e.who.as_str() == "s03");
    assert_eq!(sent.count() % 2, 0);
    let (_, plain) = run_simulation(&s, &config(8, 2, &[])).unwrap();
    assert_eq!(r.state_digest, plain.state_digest);
}

#[test]
fn droppers_do_not_stall_the_class() {
    let s = sample_scenario();
    for phase in PhaseId::ALL.into_iter().filter(|p| *p != PhaseId::Ended) {
        for rejoin in ["3000", "never"] {
            let c = config(
                12,
                5,
                &[&format!("s04=dropper:phase={phase},rejoin={rejoin}")],
            );
            let (_, r) = run_simulation(&s, &c).unwrap();
            assert!(r.ok(), "{phase} {rejoin}: {r:#?}");
            assert_eq!(r.drops.len(), 1, "{phase} {rejoin}");
            assert_eq!(
                r.drops[0].rejoined_at.is_some(),
                rejoin != "never" && r.drops[0].phase < PhaseId::Discussion
            );
        }
    }
}

#[test]
fn room_crash_recovers_from_its_checkpoint() {
    let s = sample_scenario();
    for phase in PhaseId::ALL.into_iter().filter(|p| *p != PhaseId::Ended) {
        let (t, r) = run_simulation(&s, &config(11, 8, &[&format!("crash@{phase}")])).unwrap();
        assert!(r.ok(), "{phase}: {r:#?}");
        assert_eq!(r.crashes, vec![phase]);
        assert_eq!(t.entries.iter().filter(|e| e.dir == Dir::Crash).count(), 1);
    }
}

#[test]
fn crash_needs_the_in_process_transport() {
    let s = sample_scenario();
    let mut c = config(6, 1, &["crash@PairPuzzle"]);
    c.transport = TransportKind::Tcp;
    assert!(run_simulation(&s, &c).is_err());
}

#[test]
fn wrong_scanners_and_slow_players_still_finish() {
    let s = sample_scenario();
    let (_, r) = run_simulation(&s, &config(15, 3, &["wrong_scanner:p=0.6"])).unwrap();
    assert!(r.ok(), "{r:#?}");
    assert!(r.error_codes.get(codes::WRONG_MARKER).copied().unwrap_or(0) > 0);
    let (_, slow) = run_simulation(&s, &config(15, 3, &["slow:min=10000,max=60000"])).unwrap();
    assert!(slow.ok(), "{slow:#?}");
    let (_, fast) = run_simulation(&s, &config(15, 3, &[])).unwrap();
    assert!(slow.virtual_ms > fast.virtual_ms);
}

#[test]
fn missing_teacher_is_a_reported_deadlock() {
    let s = sample_scenario();
    let (_, r) = run_simulation(
        &s,
        &config(6, 1, &["teacher=dropper:phase=Lobby,rejoin=never"]),
    )
    .unwrap();
    assert!(!r.ok());
    let d = r.deadlock.expect("deadlock");
    assert_eq!(d.phase, PhaseId::Lobby);
}

#[test]
fn unknown_player_in_a_profile_is_an_error() {
    let s = sample_scenario();
    assert!(run_simulation(&s, &config(6, 1, &["s99=slow"])).is_err());
    assert!(run_simulation(&s, &config(6, 1, &["dup:nobody"])).is_err());
}

#[test]
fn resumed_checkpoints_match_the_uninterrupted_run() {
    let s = sample_scenario();
    let r = checkpoint_equivalence(&s, &SimConfig::new(20, 11), 10).unwrap();
    assert!(r.ok(), "{r:#?}");
    let count = |tag: &str| r.cases.iter().filter(|c| c.label.contains(tag)).count();
    assert_eq!(count("phase:"), PhaseId::ALL.len() - 1);
    assert_eq!(count("random"), 10);
    assert!(count("stored:") >= PhaseId::ALL.len());
}

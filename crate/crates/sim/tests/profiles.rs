use classplay_core::ids::PlayerId;
use classplay_core::phase::PhaseId;
use classplay_sim::profile::{ProfileError, Target};
use classplay_sim::{BotKind, Fault, ProfileSpec, SimConfig};

fn spec(s: &str) -> ProfileSpec {
    s.parse().unwrap_or_else(|e| panic!("{s}: {e}"))
}

#[test]
fn bare_kind_applies_to_everyone() {
    let p = spec("slow");
    assert_eq!(p.target, Target::All);
    assert_eq!(
        p.profile.kind,
        BotKind::Slow {
            min_ms: 8_000,
            max_ms: 30_000
        }
    );
}

#[test]
fn player_and_parameters() {
    let p = spec("s03=slow:min=5000,max=20000");
    assert_eq!(p.target, Target::Player(PlayerId::from("s03")));
    assert_eq!(
        p.profile.kind,
        BotKind::Slow {
            min_ms: 5000,
            max_ms: 20000
        }
    );
    let p = spec("*=dropper:phase=PairPuzzle,rejoin=never,seed=9");
    assert_eq!(p.target, Target::All);
    assert_eq!(
        p.profile.kind,
        BotKind::Dropper {
            phase: PhaseId::PairPuzzle,
            rejoin_ms: None
        }
    );
    assert_eq!(p.profile.seed, Some(9));
    assert_eq!(
        spec("wrong_scanner:p=0.25").profile.kind,
        BotKind::WrongScanner { p: 0.25 }
    );
    assert_eq!(spec("teacher=compliant").profile.kind, BotKind::Compliant);
}

#[test]
fn bad_profiles_are_rejected() {
    let err = |s: &str| s.parse::<ProfileSpec>().unwrap_err();
    assert_eq!(err("lazy"), ProfileError::UnknownKind("lazy".into()));
    assert!(matches!(
        err("slow:speed=3"),
        ProfileError::UnknownParam { .. }
    ));
    assert!(matches!(err("slow:min=abc"), ProfileError::BadValue { .. }));
    assert_eq!(
        err("slow:min=10,max=5"),
        ProfileError::Range { min: 10, max: 5 }
    );
    assert_eq!(err("wrong_scanner:p=1.5"), ProfileError::Probability(1.5));
    assert_eq!(err("wrong_scanner:p=-0.1"), ProfileError::Probability(-0.1));
    assert!(matches!(
        err("dropper:phase=Recess"),
        ProfileError::BadValue { .. }
    ));
}

#[test]
fn faults_parse() {
    let f: Fault = "drop:s02@GroupFormation".parse().unwrap();
    assert_eq!(
        f,
        Fault::Drop {
            player: PlayerId::from("s02"),
            phase: PhaseId::GroupFormation,
            rejoin_ms: Some(20_000)
        }
    );
    let f: Fault = "drop:s02@GroupFormation+never".parse().unwrap();
    assert!(matches!(
        f,
        Fault::Drop {
            rejoin_ms: None,
            ..
        }
    ));
    let f: Fault = "drop:s02@Lobby+1500".parse().unwrap();
    assert!(matches!(
        f,
        Fault::Drop {
            rejoin_ms: Some(1500),
            ..
        }
    ));
    assert_eq!(
        "crash@DiaryCircle".parse::<Fault>().unwrap(),
        Fault::Crash {
            phase: PhaseId::DiaryCircle
        }
    );
    assert_eq!(
        "dup:s01".parse::<Fault>().unwrap(),
        Fault::Duplicate {
            player: PlayerId::from("s01")
        }
    );
    for bad in [
        "crash",
        "crash@Nap",
        "drop:s01",
        "drop:@Lobby",
        "dup:",
        "explode",
    ] {
        assert!(bad.parse::<Fault>().is_err(), "{bad}");
    }
}

#[test]
fn own_profile_beats_wildcard() {
    let mut c = SimConfig::new(6, 1);
    c.profiles.push(spec("s02=wrong_scanner:p=0.1"));
    c.profiles.push(spec("slow"));
    assert_eq!(
        c.profile_for(&PlayerId::from("s02")).kind,
        BotKind::WrongScanner { p: 0.1 }
    );
    assert!(matches!(
        c.profile_for(&PlayerId::from("s01")).kind,
        BotKind::Slow { .. }
    ));
    assert_eq!(
        SimConfig::new(6, 1)
            .profile_for(&PlayerId::from("s01"))
            .kind,
        BotKind::Compliant
    );
}

//! One example message per catalog type, as documented in docs/protocol.md.

use classplay_core::engine::{PlayerView, UnitView};
use classplay_core::phase::PhaseId;
use classplay_core::protocol::*;
use classplay_core::scenario::Track;

fn c(seq: u64, body: impl Into<Body>) -> WireMessage {
    WireMessage::new("K7M3QP", seq, body)
}

pub fn examples() -> Vec<WireMessage> {
    let view = PlayerView {
        player_id: "s07".into(),
        role: Role::Player,
        phase: PhaseId::PairFormation,
        paused: false,
        persona_name: "Ada".into(),
        instrument: Some("piano".into()),
        track: Some(Track::B),
        current_target: None,
        task: Some(PuzzleTask {
            kind: TaskKind::PairHandshake,
            unit_id: Some("p03".into()),
            prompt: "Find your partner and hold your phones together".into(),
            target: None,
            line: None,
        }),
        reveals: vec![Reveal {
            artifact_id: "teddy".into(),
            reveal_text: "A worn teddy bear.".into(),
            fragments: vec![FragmentView {
                fragment_id: "f_sister".into(),
                text: "Her little sister still lives with their father.".into(),
            }],
            next_target: None,
            catch_up: false,
        }],
        pair: Some(UnitView {
            unit_id: "p03".into(),
            members: vec![MemberView {
                player_id: "s02".into(),
                persona_name: "Ben".into(),
            }],
            token: Some("HK4W".into()),
            role: HandshakeRole::Receiver,
            epoch: 1,
            formed: false,
            solved: false,
        }),
        group: None,
        hint_level: 0,
        heard: vec![],
        diary: vec![],
        read_turn: None,
        challenge: None,
        prompts: vec![],
    };
    vec![
        c(
            1,
            Join {
                player_id: "s07".into(),
            },
        ),
        c(2, RoleAck { line: 1 }),
        c(
            3,
            Scan {
                marker_id: "m3".into(),
            },
        ),
        c(
            4,
            Proximity {
                code: "TX7C".into(),
            },
        ),
        c(5, PuzzleSubmit { code: "47".into() }),
        c(
            6,
            ChallengeScan {
                marker_id: "m6".into(),
            },
        ),
        c(7, ReadDone { order: 2 }),
        c(1, FacilitatorCmd::Start),
        c(2, FacilitatorCmd::SkipPhase),
        c(
            3,
            FacilitatorCmd::Restore {
                checkpoint: "000412".into(),
            },
        ),
        c(
            4,
            FacilitatorCmd::TeacherShareDone {
                group_id: "g2".into(),
            },
        ),
        c(
            1,
            JoinAck {
                player_id: "s07".into(),
                role: Role::Player,
                persona_name: "Ada".into(),
                instrument: Some("piano".into()),
                phase: PhaseId::Lobby,
            },
        ),
        c(
            2,
            PhaseChange {
                phase: PhaseId::IndividualDiscovery,
                paused: false,
                message: "Follow your notepad to the marked places".into(),
            },
        ),
        c(
            3,
            Reveal {
                artifact_id: "teddy".into(),
                reveal_text: "A worn teddy bear with a name tag that says 'Pip'.".into(),
                fragments: vec![FragmentView {
                    fragment_id: "f_sister".into(),
                    text: "Her little sister still lives with their father.".into(),
                }],
                next_target: Some("m4".into()),
                catch_up: false,
            },
        ),
        c(
            4,
            PairAssign {
                pair_id: "p03".into(),
                partners: vec![MemberView {
                    player_id: "s02".into(),
                    persona_name: "Ben".into(),
                }],
                token: "HK4W".into(),
                role: HandshakeRole::Receiver,
                epoch: 1,
            },
        ),
        c(
            5,
            PuzzleTask {
                kind: TaskKind::Discover,
                unit_id: None,
                prompt: "Go to: On the bookshelf, second row".into(),
                target: Some("m3".into()),
                line: None,
            },
        ),
        c(
            6,
            PuzzleResult {
                unit_id: "p03".into(),
                kind: TaskKind::PairPuzzle,
                correct: false,
                attempts: 2,
                message: "That number does not open anything.\nCompare your objects again.".into(),
            },
        ),
        c(
            7,
            Hint {
                unit_id: "p03".into(),
                phase: PhaseId::PairPuzzle,
                level: 1,
                text: "Look at what you both found first.".into(),
            },
        ),
        c(
            8,
            GroupAssign {
                group_id: "g2".into(),
                members: vec![
                    MemberView {
                        player_id: "s02".into(),
                        persona_name: "Ben".into(),
                    },
                    MemberView {
                        player_id: "s11".into(),
                        persona_name: "Cleo".into(),
                    },
                ],
                token: "N6RA".into(),
                role: HandshakeRole::Sender,
                epoch: 2,
            },
        ),
        c(
            9,
            TeacherInfo {
                group_id: Some("g2".into()),
                text: "Your teacher tells you something new".into(),
                fragment: Some(FragmentView {
                    fragment_id: "f_teacher_sleep".into(),
                    text: "Nora often arrives tired because she sleeps badly.".into(),
                }),
                prompts: vec![],
            },
        ),
        c(
            10,
            ChallengeUpdate {
                deadline: 1_500_000,
                scanned: 3,
                total: 7,
                complete: false,
                finished: false,
            },
        ),
        c(
            11,
            DiaryAssign {
                fragments: vec![DiaryLine {
                    order: 2,
                    text: "Pip is with my sister.".into(),
                }],
            },
        ),
        c(
            12,
            ReadTurn {
                order: 2,
                holder: "s07".into(),
            },
        ),
        c(
            13,
            Choreography {
                action: "form_circle".into(),
                execute_at: 1_803_000,
            },
        ),
        c(
            14,
            AudioCue {
                cue: "piano".into(),
                start_at: 1_203_000,
                artifact_id: None,
            },
        ),
        c(15, Resync { view }),
        c(
            16,
            ErrorMsg::new("version", "unsupported protocol version 2"),
        ),
    ]
}

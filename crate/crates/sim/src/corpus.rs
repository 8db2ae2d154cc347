//! Random catalog messages for codec round-trip checks.

use classplay_core::engine::{PlayerView, UnitView};
use classplay_core::ids::{ArtifactId, FragmentId, MarkerId, PlayerId, UnitId};
use classplay_core::phase::PhaseId;
use classplay_core::protocol::{
    AudioCue, Body, ChallengeScan, ChallengeUpdate, Choreography, DiaryAssign, DiaryLine, ErrorMsg,
    FacilitatorCmd, FragmentView, GroupAssign, HandshakeRole, Hint, Join, JoinAck, MemberView,
    PairAssign, PhaseChange, Proximity, PuzzleResult, PuzzleSubmit, PuzzleTask, ReadDone, ReadTurn,
    Resync, Reveal, Role, RoleAck, Scan, TaskKind, TeacherInfo, WireMessage, CLIENT_TYPES,
    SERVER_TYPES,
};
use classplay_core::scenario::Track;
use rand::Rng;

/// Characters that stress JSON escaping and UTF-8 handling.
const PIECES: &[&str] = &[
    "a", "Z", "7", " ", "\"", "\\", "\n", "\r", "\t", "\u{1}", "\u{7f}", "é", "漢", "🎻",
    "\u{2028}", "{", "}", ":", ",", "/",
];

fn text(rng: &mut impl Rng) -> String {
    let n = rng.random_range(0..12);
    (0..n)
        .map(|_| PIECES[rng.random_range(0..PIECES.len())])
        .collect()
}

fn id(rng: &mut impl Rng) -> String {
    let n = rng.random_range(1..8);
    (0..n)
        .map(|_| char::from(b"abcxyz0189_-"[rng.random_range(0..12)]))
        .collect()
}

fn small(rng: &mut impl Rng) -> usize {
    rng.random_range(0..50)
}

fn phase(rng: &mut impl Rng) -> PhaseId {
    PhaseId::ALL[rng.random_range(0..PhaseId::ALL.len())]
}

fn task_kind(rng: &mut impl Rng) -> TaskKind {
    use TaskKind::*;
    [
        Roleplay,
        Notepad,
        Discover,
        PairHandshake,
        PairPuzzle,
        GroupHandshake,
        GroupPuzzle,
        Unlock,
        TeacherVisit,
    ][rng.random_range(0..9)]
}

fn hs_role(rng: &mut impl Rng) -> HandshakeRole {
    if rng.random_bool(0.5) {
        HandshakeRole::Sender
    } else {
        HandshakeRole::Receiver
    }
}

fn members(rng: &mut impl Rng) -> Vec<MemberView> {
    (0..rng.random_range(0..4))
        .map(|_| MemberView {
            player_id: PlayerId::new(id(rng)),
            persona_name: text(rng),
        })
        .collect()
}

fn fragments(rng: &mut impl Rng) -> Vec<FragmentView> {
    (0..rng.random_range(0..3))
        .map(|_| FragmentView {
            fragment_id: FragmentId::new(id(rng)),
            text: text(rng),
        })
        .collect()
}

fn task(rng: &mut impl Rng) -> PuzzleTask {
    PuzzleTask {
        kind: task_kind(rng),
        unit_id: rng.random_bool(0.5).then(|| UnitId::new(id(rng))),
        prompt: text(rng),
        target: rng.random_bool(0.5).then(|| MarkerId::new(id(rng))),
        line: rng.random_bool(0.5).then(|| small(rng)),
    }
}

fn reveal(rng: &mut impl Rng) -> Reveal {
    Reveal {
        artifact_id: ArtifactId::new(id(rng)),
        reveal_text: text(rng),
        fragments: fragments(rng),
        next_target: rng.random_bool(0.5).then(|| MarkerId::new(id(rng))),
        catch_up: rng.random_bool(0.5),
    }
}

fn diary(rng: &mut impl Rng) -> Vec<DiaryLine> {
    (0..rng.random_range(0..3))
        .map(|_| DiaryLine {
            order: small(rng),
            text: text(rng),
        })
        .collect()
}

fn challenge(rng: &mut impl Rng) -> ChallengeUpdate {
    ChallengeUpdate {
        deadline: rng.random(),
        scanned: small(rng),
        total: small(rng),
        complete: rng.random_bool(0.5),
        finished: rng.random_bool(0.5),
    }
}

fn unit_view(rng: &mut impl Rng) -> UnitView {
    UnitView {
        unit_id: UnitId::new(id(rng)),
        members: members(rng),
        token: rng.random_bool(0.5).then(|| text(rng)),
        role: hs_role(rng),
        epoch: rng.random(),
        formed: rng.random_bool(0.5),
        solved: rng.random_bool(0.5),
    }
}

fn view(rng: &mut impl Rng) -> PlayerView {
    PlayerView {
        player_id: PlayerId::new(id(rng)),
        role: if rng.random_bool(0.5) {
            Role::Player
        } else {
            Role::Facilitator
        },
        phase: phase(rng),
        paused: rng.random_bool(0.5),
        persona_name: text(rng),
        instrument: rng.random_bool(0.5).then(|| text(rng)),
        track: rng.random_bool(0.5).then(|| {
            if rng.random_bool(0.5) {
                Track::A
            } else {
                Track::B
            }
        }),
        current_target: rng.random_bool(0.5).then(|| MarkerId::new(id(rng))),
        task: rng.random_bool(0.5).then(|| task(rng)),
        reveals: (0..rng.random_range(0..3)).map(|_| reveal(rng)).collect(),
        pair: rng.random_bool(0.5).then(|| unit_view(rng)),
        group: rng.random_bool(0.5).then(|| unit_view(rng)),
        hint_level: rng.random_range(0..4),
        heard: fragments(rng),
        diary: diary(rng),
        read_turn: rng.random_bool(0.5).then(|| ReadTurn {
            order: small(rng),
            holder: PlayerId::new(id(rng)),
        }),
        challenge: rng.random_bool(0.5).then(|| challenge(rng)),
        prompts: (0..rng.random_range(0..3)).map(|_| text(rng)).collect(),
    }
}

/// A random body of catalog type `kind` (an index into the client types
/// followed by the server types).
pub fn random_body(rng: &mut impl Rng, kind: usize) -> Body {
    match kind % (CLIENT_TYPES.len() + SERVER_TYPES.len()) {
        0 => Join {
            player_id: PlayerId::new(id(rng)),
        }
        .into(),
        1 => RoleAck { line: small(rng) }.into(),
        2 => Scan {
            marker_id: MarkerId::new(id(rng)),
        }
        .into(),
        3 => Proximity { code: text(rng) }.into(),
        4 => PuzzleSubmit { code: text(rng) }.into(),
        5 => ChallengeScan {
            marker_id: MarkerId::new(id(rng)),
        }
        .into(),
        6 => ReadDone { order: small(rng) }.into(),
        7 => match rng.random_range(0..6) {
            0 => FacilitatorCmd::Start,
            1 => FacilitatorCmd::Pause,
            2 => FacilitatorCmd::Resume,
            3 => FacilitatorCmd::SkipPhase,
            4 => FacilitatorCmd::Restore {
                checkpoint: text(rng),
            },
            _ => FacilitatorCmd::TeacherShareDone {
                group_id: UnitId::new(id(rng)),
            },
        }
        .into(),
        8 => JoinAck {
            player_id: PlayerId::new(id(rng)),
            role: if rng.random_bool(0.5) {
                Role::Player
            } else {
                Role::Facilitator
            },
            persona_name: text(rng),
            instrument: rng.random_bool(0.5).then(|| text(rng)),
            phase: phase(rng),
        }
        .into(),
        9 => PhaseChange {
            phase: phase(rng),
            paused: rng.random_bool(0.5),
            message: text(rng),
        }
        .into(),
        10 => reveal(rng).into(),
        11 => PairAssign {
            pair_id: UnitId::new(id(rng)),
            partners: members(rng),
            token: text(rng),
            role: hs_role(rng),
            epoch: rng.random(),
        }
        .into(),
        12 => task(rng).into(),
        13 => PuzzleResult {
            unit_id: UnitId::new(id(rng)),
            kind: task_kind(rng),
            correct: rng.random_bool(0.5),
            attempts: rng.random(),
            message: text(rng),
        }
        .into(),
        14 => Hint {
            unit_id: id(rng),
            phase: phase(rng),
            level: rng.random_range(0..4),
            text: text(rng),
        }
        .into(),
        15 => GroupAssign {
            group_id: UnitId::new(id(rng)),
            members: members(rng),
            token: text(rng),
            role: hs_role(rng),
            epoch: rng.random(),
        }
        .into(),
        16 => TeacherInfo {
            group_id: rng.random_bool(0.5).then(|| UnitId::new(id(rng))),
            text: text(rng),
            fragment: fragments(rng).pop(),
            prompts: (0..rng.random_range(0..3)).map(|_| text(rng)).collect(),
        }
        .into(),
        17 => challenge(rng).into(),
        18 => DiaryAssign {
            fragments: diary(rng),
        }
        .into(),
        19 => ReadTurn {
            order: small(rng),
            holder: PlayerId::new(id(rng)),
        }
        .into(),
        20 => Choreography {
            action: text(rng),
            execute_at: rng.random(),
        }
        .into(),
        21 => AudioCue {
            cue: text(rng),
            start_at: rng.random(),
            artifact_id: rng.random_bool(0.5).then(|| ArtifactId::new(id(rng))),
        }
        .into(),
        22 => Resync { view: view(rng) }.into(),
        _ => ErrorMsg::new(id(rng), text(rng)).into(),
    }
}

/// A random message covering the whole catalog with equal weight.
pub fn random_message(rng: &mut impl Rng) -> WireMessage {
    let kind = rng.random_range(0..CLIENT_TYPES.len() + SERVER_TYPES.len());
    let body = random_body(rng, kind);
    WireMessage::new(id(rng), rng.random(), body)
}

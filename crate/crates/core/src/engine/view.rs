//! What one player is allowed to see: the basis of resync after reconnect.

use serde::{Deserialize, Serialize};

use super::machine::{formation_done, handshake_role};
use super::state::{SessionState, Unit};
use super::UnitKind;
use crate::ids::{MarkerId, PlayerId, UnitId};
use crate::phase::PhaseId;
use crate::protocol::{
    ChallengeUpdate, DiaryLine, FragmentView, HandshakeRole, MemberView, PuzzleTask, ReadTurn,
    Reveal, Role, TaskKind,
};
use crate::scenario::{Scenario, Track};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitView {
    pub unit_id: UnitId,
    pub members: Vec<MemberView>,
    pub token: Option<String>,
    pub role: HandshakeRole,
    pub epoch: u32,
    pub formed: bool,
    pub solved: bool,
}

/// A player's slice of the session. Contains only artifacts the player has
/// discovered and teacher fragments heard by the player's own group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerView {
    pub player_id: PlayerId,
    pub role: Role,
    pub phase: PhaseId,
    pub paused: bool,
    pub persona_name: String,
    pub instrument: Option<String>,
    pub track: Option<Track>,
    pub current_target: Option<MarkerId>,
    pub task: Option<PuzzleTask>,
    pub reveals: Vec<Reveal>,
    pub pair: Option<UnitView>,
    pub group: Option<UnitView>,
    pub hint_level: u32,
    pub heard: Vec<FragmentView>,
    pub diary: Vec<DiaryLine>,
    pub read_turn: Option<ReadTurn>,
    pub challenge: Option<ChallengeUpdate>,
    /// Discussion questions; the teacher's view only.
    pub prompts: Vec<String>,
}

fn fragment_view(s: &Scenario, id: &str) -> Option<FragmentView> {
    s.fragment(id).map(|f| FragmentView {
        fragment_id: f.fragment_id.clone(),
        text: f.text.clone(),
    })
}

fn unit_view(st: &SessionState, unit: &Unit, kind: UnitKind, me: &PlayerId) -> UnitView {
    let p = &st.players[me];
    UnitView {
        unit_id: unit.id.clone(),
        members: unit
            .members
            .iter()
            .filter(|m| *m != me)
            .map(|m| MemberView {
                player_id: m.clone(),
                persona_name: st.players[m].persona_name.clone(),
            })
            .collect(),
        token: p.pair_token.clone(),
        role: handshake_role(st, unit, kind, me),
        epoch: p.token_epoch,
        formed: formation_done(st, unit, kind),
        solved: unit.solved,
    }
}

/// The task `player` (student or teacher) is currently working on, if any.
pub fn current_task(s: &Scenario, st: &SessionState, player: &PlayerId) -> Option<PuzzleTask> {
    if st.phase == PhaseId::RegisterRoleplay {
        return s.roleplay_script.get(st.script_cursor).map(|l| PuzzleTask {
            kind: TaskKind::Roleplay,
            unit_id: None,
            prompt: l.prompt_text.clone(),
            target: None,
            line: Some(st.script_cursor),
        });
    }
    let p = st.players.get(player)?;
    let task = |kind, unit_id: Option<UnitId>, prompt: String, target: Option<MarkerId>| {
        Some(PuzzleTask {
            kind,
            unit_id,
            prompt,
            target,
            line: None,
        })
    };
    let label = |m: &MarkerId| {
        s.marker(m.as_str())
            .map(|d| d.location_label.clone())
            .unwrap_or_default()
    };
    match st.phase {
        PhaseId::NotepadDiscovery if !p.notepad_opened => task(
            TaskKind::Notepad,
            None,
            "You have a message: look under your desk".into(),
            None,
        ),
        PhaseId::IndividualDiscovery => {
            let m = p.current_target.as_ref()?;
            task(
                TaskKind::Discover,
                None,
                format!("Go to: {}", label(m)),
                Some(m.clone()),
            )
        }
        PhaseId::PairFormation => {
            let pair = st.pair_of(player)?;
            (!formation_done(st, &pair.unit, UnitKind::Pair)).then_some(())?;
            task(
                TaskKind::PairHandshake,
                Some(pair.unit.id.clone()),
                "Find your partner and hold your phones together".into(),
                None,
            )
        }
        PhaseId::PairPuzzle => {
            let u = &st.pair_of(player)?.unit;
            if !u.solved {
                let prompt = if p.track == Track::B {
                    "Compare the objects you both found. Which number do they point to?"
                } else {
                    "Tell your partner what you found. They enter the number."
                };
                task(
                    TaskKind::PairPuzzle,
                    Some(u.id.clone()),
                    prompt.into(),
                    None,
                )
            } else if u.unlocked.is_none() {
                let m = u.unlock_marker.as_ref()?;
                task(
                    TaskKind::Unlock,
                    Some(u.id.clone()),
                    format!("The number opens something at: {}", label(m)),
                    Some(m.clone()),
                )
            } else {
                None
            }
        }
        PhaseId::GroupFormation => {
            let g = st.group_of(player)?;
            (!formation_done(st, &g.unit, UnitKind::Group)).then_some(())?;
            task(
                TaskKind::GroupHandshake,
                Some(g.unit.id.clone()),
                "Find the members of your new group".into(),
                None,
            )
        }
        PhaseId::GroupPuzzle | PhaseId::TeacherShare => {
            let g = st.group_of(player)?;
            let u = &g.unit;
            if !u.solved {
                let prompt = s
                    .group_task(g.task_index)
                    .map(|t| t.prompt.clone())
                    .unwrap_or_default();
                task(TaskKind::GroupPuzzle, Some(u.id.clone()), prompt, None)
            } else if !u.puzzle_done() {
                let m = u.unlock_marker.as_ref()?;
                task(
                    TaskKind::Unlock,
                    Some(u.id.clone()),
                    format!("Your answer opens something at: {}", label(m)),
                    Some(m.clone()),
                )
            } else if !g.teacher_visited {
                task(
                    TaskKind::TeacherVisit,
                    Some(u.id.clone()),
                    "Go to your teacher and share what you found".into(),
                    None,
                )
            } else {
                None
            }
        }
        _ => None,
    }
}

/// The view a (re)joining identity receives. In the Lobby only the persona
/// is known; unknown identities get `None`.
pub fn resync_view(s: &Scenario, st: &SessionState, id: &PlayerId) -> Option<PlayerView> {
    let read_turn = if st.phase == PhaseId::DiaryCircle {
        st.diary_holder(st.read_cursor).map(|h| ReadTurn {
            order: st.read_cursor,
            holder: h.clone(),
        })
    } else {
        None
    };
    let diary = st
        .diary_assignment
        .get(id)
        .map(|orders| {
            orders
                .iter()
                .map(|&o| DiaryLine {
                    order: o,
                    text: s.diary_text(o).unwrap_or_default().to_owned(),
                })
                .collect()
        })
        .unwrap_or_default();
    let challenge = st.challenge.as_ref().map(|c| ChallengeUpdate {
        deadline: c.deadline,
        scanned: c.scanned.values().filter(|&&n| n > 0).count(),
        total: c.scanned.len(),
        complete: c.complete,
        finished: c.finished,
    });
    if st.is_teacher(id) {
        return Some(PlayerView {
            player_id: id.clone(),
            role: Role::Facilitator,
            phase: st.phase,
            paused: st.paused,
            persona_name: st.teacher.persona_name.clone(),
            instrument: None,
            track: None,
            current_target: None,
            task: current_task(s, st, id),
            reveals: Vec::new(),
            pair: None,
            group: None,
            hint_level: 0,
            heard: Vec::new(),
            diary,
            read_turn,
            challenge,
            prompts: if st.phase >= PhaseId::Discussion {
                s.discussion_prompts.clone()
            } else {
                Vec::new()
            },
        });
    }
    let p = st.players.get(id)?;
    let mut view = PlayerView {
        player_id: id.clone(),
        role: Role::Player,
        phase: st.phase,
        paused: st.paused,
        persona_name: p.persona_name.clone(),
        instrument: p.instrument.clone(),
        track: None,
        current_target: None,
        task: None,
        reveals: Vec::new(),
        pair: None,
        group: None,
        hint_level: 0,
        heard: Vec::new(),
        diary: Vec::new(),
        read_turn: None,
        challenge: None,
        prompts: Vec::new(),
    };
    if st.phase == PhaseId::Lobby {
        return Some(view);
    }
    view.track = Some(p.track);
    view.current_target = p.current_target.clone();
    view.task = current_task(s, st, id);
    view.reveals = p
        .discovered
        .iter()
        .filter_map(|a| s.artifact(a.as_str()))
        .map(|a| Reveal {
            artifact_id: a.artifact_id.clone(),
            reveal_text: a.reveal_text.clone(),
            fragments: a
                .fragment_ids
                .iter()
                .filter_map(|f| fragment_view(s, f.as_str()))
                .collect(),
            next_target: None,
            catch_up: false,
        })
        .collect();
    view.pair = st
        .pair_of(id)
        .map(|u| unit_view(st, &u.unit, UnitKind::Pair, id));
    view.group = st
        .group_of(id)
        .map(|g| unit_view(st, &g.unit, UnitKind::Group, id));
    view.hint_level = p.hint_level;
    view.heard = p
        .heard
        .iter()
        .filter_map(|f| fragment_view(s, f.as_str()))
        .collect();
    view.diary = diary;
    view.read_turn = read_turn;
    view.challenge = challenge;
    Some(view)
}

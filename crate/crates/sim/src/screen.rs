//! What a client device shows, rebuilt from the frames it receives.

use std::collections::BTreeSet;

use classplay_core::engine::{PlayerView, UnitView};
use classplay_core::ids::{PlayerId, UnitId};
use classplay_core::phase::PhaseId;
use classplay_core::protocol::{
    Body, ChallengeUpdate, DiaryLine, ErrorMsg, GroupAssign, HandshakeRole, MemberView, PairAssign,
    PuzzleTask, ReadTurn, Reveal, Role, TaskKind,
};

/// A pair or group as its member's device knows it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitScreen {
    pub id: UnitId,
    pub partners: Vec<PlayerId>,
    pub token: Option<String>,
    pub role: HandshakeRole,
    pub epoch: u32,
}

fn partner_ids(members: &[MemberView]) -> Vec<PlayerId> {
    members.iter().map(|m| m.player_id.clone()).collect()
}

impl From<&UnitView> for UnitScreen {
    fn from(u: &UnitView) -> Self {
        Self {
            id: u.unit_id.clone(),
            partners: partner_ids(&u.members),
            token: u.token.clone(),
            role: u.role,
            epoch: u.epoch,
        }
    }
}

impl From<&PairAssign> for UnitScreen {
    fn from(a: &PairAssign) -> Self {
        Self {
            id: a.pair_id.clone(),
            partners: partner_ids(&a.partners),
            token: Some(a.token.clone()),
            role: a.role,
            epoch: a.epoch,
        }
    }
}

impl From<&GroupAssign> for UnitScreen {
    fn from(a: &GroupAssign) -> Self {
        Self {
            id: a.group_id.clone(),
            partners: partner_ids(&a.members),
            token: Some(a.token.clone()),
            role: a.role,
            epoch: a.epoch,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Screen {
    pub joined: bool,
    pub role: Option<Role>,
    pub phase: PhaseId,
    pub paused: bool,
    pub task: Option<PuzzleTask>,
    pub reveals: Vec<Reveal>,
    pub pair: Option<UnitScreen>,
    pub group: Option<UnitScreen>,
    /// Groups announced to the teacher as on their way.
    pub arrivals: BTreeSet<UnitId>,
    /// Groups whose teacher fragment this device has received.
    pub heard_from_teacher: BTreeSet<UnitId>,
    pub diary: Vec<DiaryLine>,
    pub read_turn: Option<ReadTurn>,
    pub challenge: Option<ChallengeUpdate>,
    pub prompts: Vec<String>,
    pub errors: Vec<ErrorMsg>,
    pub frames: u64,
}

impl Default for Screen {
    fn default() -> Self {
        Self {
            joined: false,
            role: None,
            phase: PhaseId::Lobby,
            paused: false,
            task: None,
            reveals: Vec::new(),
            pair: None,
            group: None,
            arrivals: BTreeSet::new(),
            heard_from_teacher: BTreeSet::new(),
            diary: Vec::new(),
            read_turn: None,
            challenge: None,
            prompts: Vec::new(),
            errors: Vec::new(),
            frames: 0,
        }
    }
}

/// What a received frame changed, as far as the bot's bookkeeping cares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Update {
    Nothing,
    /// The session moved to another phase.
    Phase,
    /// A full view replaced the screen.
    Resynced,
}

impl Screen {
    pub fn is_teacher(&self) -> bool {
        self.role == Some(Role::Facilitator)
    }

    pub fn apply(&mut self, body: &Body) -> Update {
        self.frames += 1;
        match body {
            Body::JoinAck(a) => {
                self.joined = true;
                self.role = Some(a.role);
                if a.phase != self.phase {
                    self.phase = a.phase;
                    return Update::Phase;
                }
            }
            Body::PhaseChange(c) => {
                self.paused = c.paused;
                if c.phase != self.phase {
                    self.phase = c.phase;
                    self.task = None;
                    return Update::Phase;
                }
            }
            Body::Resync(r) => {
                self.load(&r.view);
                return Update::Resynced;
            }
            Body::PuzzleTask(t) => self.task = Some(t.clone()),
            Body::Reveal(r) => {
                if !self.reveals.iter().any(|x| x.artifact_id == r.artifact_id) {
                    self.reveals.push(r.clone());
                }
                if let Some(task) = &mut self.task {
                    match task.kind {
                        TaskKind::Discover if !r.catch_up => match &r.next_target {
                            Some(next) => task.target = Some(next.clone()),
                            None => self.task = None,
                        },
                        TaskKind::Unlock => self.task = None,
                        _ => {}
                    }
                }
            }
            Body::PuzzleResult(r) if r.correct => {
                if self
                    .task
                    .as_ref()
                    .is_some_and(|t| t.kind == r.kind && t.unit_id.as_ref() == Some(&r.unit_id))
                {
                    self.task = None;
                }
            }
            Body::PairAssign(a) => self.pair = Some(a.into()),
            Body::GroupAssign(a) => self.group = Some(a.into()),
            Body::TeacherInfo(i) => {
                if let Some(g) = &i.group_id {
                    if i.fragment.is_some() || self.group.as_ref().is_some_and(|u| &u.id == g) {
                        self.heard_from_teacher.insert(g.clone());
                        if self
                            .task
                            .as_ref()
                            .is_some_and(|t| t.kind == TaskKind::TeacherVisit)
                        {
                            self.task = None;
                        }
                    } else {
                        self.arrivals.insert(g.clone());
                    }
                }
                if !i.prompts.is_empty() {
                    self.prompts = i.prompts.clone();
                }
            }
            Body::ChallengeUpdate(c) => self.challenge = Some(c.clone()),
            Body::DiaryAssign(d) => self.diary = d.fragments.clone(),
            Body::ReadTurn(t) => self.read_turn = Some(t.clone()),
            Body::Error(e) => self.errors.push(e.clone()),
            _ => {}
        }
        Update::Nothing
    }

    fn load(&mut self, v: &PlayerView) {
        self.joined = true;
        self.role = Some(v.role);
        self.phase = v.phase;
        self.paused = v.paused;
        self.task = v.task.clone();
        self.reveals = v.reveals.clone();
        self.pair = v.pair.as_ref().map(UnitScreen::from);
        self.group = v.group.as_ref().map(UnitScreen::from);
        self.diary = v.diary.clone();
        self.read_turn = v.read_turn.clone();
        self.challenge = v.challenge.clone();
        self.prompts = v.prompts.clone();
    }

    /// The unit the current phase is about.
    pub fn unit_for_phase(&self) -> Option<&UnitScreen> {
        match self.phase {
            PhaseId::PairFormation | PhaseId::PairPuzzle => self.pair.as_ref(),
            PhaseId::GroupFormation | PhaseId::GroupPuzzle | PhaseId::TeacherShare => {
                self.group.as_ref()
            }
            _ => None,
        }
    }
}

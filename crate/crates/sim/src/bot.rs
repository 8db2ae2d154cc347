//! Scripted clients. A bot acts only on what its own screen shows, plus what
//! a student in the room could see or hear: classmates' screens held up for a
//! handshake, and the scenario's printed materials (marker labels, the code
//! sheet, the group task cards).

use std::collections::{BTreeMap, BTreeSet};

use classplay_core::engine::assign::rng_for;
use classplay_core::engine::derive_pair_code;
use classplay_core::ids::{ArtifactId, MarkerId, PlayerId, UnitId};
use classplay_core::phase::PhaseId;
use classplay_core::protocol::{
    Body, ChallengeScan, FacilitatorCmd, HandshakeRole, Join, Proximity, PuzzleSubmit, ReadDone,
    RoleAck, Scan, TaskKind,
};
use classplay_core::scenario::{Scenario, Speaker, Track};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::profile::{BotKind, BotProfile, COMPLIANT_LATENCY_MS};
use crate::screen::{Screen, Update};

/// A wrong scanner fumbles the same action at most this many times.
const MAX_FUMBLES: u32 = 3;

/// The next thing a bot wants to do.
#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum Intent {
    Join,
    Disconnect,
    Send(Action),
}

/// A message plus the bookkeeping key that stops it being sent twice in a phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub key: String,
    pub body: Body,
    /// What a careless player might send instead.
    pub wrong: Option<Body>,
}

impl Action {
    fn new(key: String, body: impl Into<Body>) -> Self {
        Self {
            key,
            body: body.into(),
            wrong: None,
        }
    }

    fn or_wrong(mut self, wrong: impl Into<Body>) -> Self {
        self.wrong = Some(wrong.into());
        self
    }
}

#[derive(Debug, Clone)]
pub struct Bot {
    pub id: PlayerId,
    pub is_teacher: bool,
    /// Position in the roster; spreads challenge scans over the markers.
    pub rank: usize,
    pub profile: BotProfile,
    pub screen: Screen,
    pub connected: bool,
    /// Client seq of the current connection.
    pub seq: u64,
    /// Drop plan: leave once the session reaches this phase.
    pub drop_at: Option<(PhaseId, Option<u64>)>,
    pub dropped_in: Option<PhaseId>,
    pub rejoin_at: Option<u64>,
    /// Every frame is transmitted twice.
    pub duplicate: bool,
    rng: ChaCha8Rng,
    done: BTreeSet<String>,
    fumbles: BTreeMap<String, u32>,
    shared: BTreeSet<UnitId>,
    challenge_k: usize,
}

/// The classroom as seen by everyone in it.
pub struct Class<'a> {
    pub scenario: &'a Scenario,
    pub bots: &'a BTreeMap<PlayerId, Bot>,
}

impl Bot {
    pub fn new(
        id: PlayerId,
        is_teacher: bool,
        rank: usize,
        profile: BotProfile,
        run_seed: u64,
    ) -> Self {
        let rng = match profile.seed {
            Some(s) => rng_for(s, "bot", 0),
            None => rng_for(run_seed, &format!("bot/{id}"), 0),
        };
        let drop_at = match profile.kind {
            BotKind::Dropper { phase, rejoin_ms } => Some((phase, rejoin_ms)),
            _ => None,
        };
        Self {
            id,
            is_teacher,
            rank,
            profile,
            screen: Screen::default(),
            connected: false,
            seq: 0,
            drop_at,
            dropped_in: None,
            rejoin_at: None,
            duplicate: false,
            rng,
            done: BTreeSet::new(),
            fumbles: BTreeMap::new(),
            shared: BTreeSet::new(),
            challenge_k: 0,
        }
    }

    /// Reaction time before the next action.
    pub fn latency(&mut self) -> u64 {
        match self.profile.kind {
            BotKind::Slow { min_ms, max_ms } => self.rng.random_range(min_ms..=max_ms),
            _ => COMPLIANT_LATENCY_MS,
        }
    }

    pub fn receive(&mut self, body: &Body) {
        match self.screen.apply(body) {
            Update::Phase | Update::Resynced => {
                self.done.clear();
                self.fumbles.clear();
            }
            Update::Nothing => {}
        }
    }

    pub fn wants_to_drop(&self) -> bool {
        self.connected
            && self.dropped_in.is_none()
            && self.screen.joined
            && self
                .drop_at
                .is_some_and(|(p, _)| self.screen.phase >= p && self.screen.phase != PhaseId::Ended)
    }

    /// Resets per-connection state after the harness disconnects this bot.
    pub fn went_away(&mut self, now: u64, crashed: bool) {
        self.connected = false;
        self.screen.joined = false;
        if !crashed {
            self.dropped_in = Some(self.screen.phase);
            let rejoin = self.drop_at.and_then(|(_, r)| r);
            self.rejoin_at = rejoin.map(|ms| now + ms);
        }
    }

    pub fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    /// What this bot would do now, or `None` if it is waiting.
    pub fn intent(&self, class: &Class<'_>, now: u64) -> Option<Intent> {
        if !self.connected {
            return self.rejoin_at.filter(|&t| t <= now).map(|_| Intent::Join);
        }
        if !self.screen.joined {
            return None;
        }
        if self.wants_to_drop() {
            return Some(Intent::Disconnect);
        }
        if self.screen.paused {
            return None;
        }
        let action = if self.is_teacher {
            self.teacher_action(class)
        } else {
            self.student_action(class)
        };
        action
            .filter(|a| !self.done.contains(&a.key))
            .map(Intent::Send)
    }

    /// Picks the body to transmit for `action` and records it as done.
    pub fn commit(&mut self, action: &Action) -> Body {
        if let (BotKind::WrongScanner { p }, Some(wrong)) = (&self.profile.kind, &action.wrong) {
            let n = self.fumbles.entry(action.key.clone()).or_default();
            if *n < MAX_FUMBLES && self.rng.random_bool(*p) {
                *n += 1;
                return wrong.clone();
            }
        }
        self.done.insert(action.key.clone());
        if let Body::FacilitatorCmd(FacilitatorCmd::TeacherShareDone { group_id }) = &action.body {
            self.shared.insert(group_id.clone());
        }
        if let Body::ChallengeScan(_) = &action.body {
            self.challenge_k += 1;
        }
        action.body.clone()
    }

    pub fn join_body(&self) -> Body {
        Join {
            player_id: self.id.clone(),
        }
        .into()
    }

    fn is_line_acker(&self, s: &Scenario, line: usize) -> bool {
        s.roleplay_script.get(line).is_some_and(|l| {
            l.ack_required
                && match l.speaker {
                    Speaker::All => true,
                    Speaker::Teacher => self.is_teacher,
                    Speaker::Player => !self.is_teacher,
                }
        })
    }

    fn roleplay(&self, s: &Scenario) -> Option<Action> {
        let task = self.screen.task.as_ref()?;
        let line = task.line?;
        (task.kind == TaskKind::Roleplay && self.is_line_acker(s, line))
            .then(|| Action::new(format!("line/{line}"), RoleAck { line }))
    }

    fn diary(&self) -> Option<Action> {
        let turn = self.screen.read_turn.as_ref()?;
        (turn.holder == self.id).then(|| {
            Action::new(
                format!("read/{}", turn.order),
                ReadDone { order: turn.order },
            )
        })
    }

    fn teacher_action(&self, class: &Class<'_>) -> Option<Action> {
        match self.screen.phase {
            PhaseId::Lobby => {
                let everyone_in = class
                    .bots
                    .values()
                    .filter(|b| b.connected)
                    .all(|b| b.screen.joined);
                everyone_in.then(|| Action::new("start".into(), FacilitatorCmd::Start))
            }
            PhaseId::RegisterRoleplay => self.roleplay(class.scenario),
            PhaseId::GroupPuzzle | PhaseId::TeacherShare => {
                // Groups announce themselves on the teacher's screen, and
                // they also walk up in person.
                let walking_up = class.bots.values().filter(|b| b.connected).filter_map(|b| {
                    let t = b.screen.task.as_ref()?;
                    (t.kind == TaskKind::TeacherVisit).then(|| t.unit_id.clone())?
                });
                let next = self
                    .screen
                    .arrivals
                    .iter()
                    .cloned()
                    .chain(walking_up)
                    .find(|g| !self.shared.contains(g))?;
                Some(Action::new(
                    format!("share/{next}"),
                    FacilitatorCmd::TeacherShareDone { group_id: next },
                ))
            }
            PhaseId::DiaryCircle => self.diary(),
            PhaseId::Discussion => Some(Action::new("skip".into(), FacilitatorCmd::SkipPhase)),
            _ => None,
        }
    }

    fn student_action(&self, class: &Class<'_>) -> Option<Action> {
        let s = class.scenario;
        match self.screen.phase {
            PhaseId::RegisterRoleplay => self.roleplay(s),
            PhaseId::NotepadDiscovery => {
                let task = self.screen.task.as_ref()?;
                (task.kind == TaskKind::Notepad)
                    .then(|| Action::new("notepad".into(), RoleAck { line: 0 }))
            }
            PhaseId::PairFormation | PhaseId::GroupFormation => self.handshake(class),
            PhaseId::TimedChallenge => {
                if self.screen.challenge.as_ref().is_some_and(|c| c.finished)
                    || s.markers.is_empty()
                {
                    return None;
                }
                let n = s.markers.len();
                let marker = s.markers[(self.rank + self.challenge_k) % n]
                    .marker_id
                    .clone();
                Some(Action::new(
                    format!("chal/{}", self.challenge_k),
                    ChallengeScan { marker_id: marker },
                ))
            }
            PhaseId::DiaryCircle => self.diary(),
            _ => self.task_action(class),
        }
    }

    fn task_action(&self, class: &Class<'_>) -> Option<Action> {
        let s = class.scenario;
        let task = self.screen.task.as_ref()?;
        match task.kind {
            TaskKind::Discover | TaskKind::Unlock => {
                let m = task.target.clone()?;
                let wrong = wrong_marker(s, &m);
                let a = Action::new(format!("scan/{m}"), Scan { marker_id: m });
                Some(match wrong {
                    Some(w) => a.or_wrong(Scan { marker_id: w }),
                    None => a,
                })
            }
            TaskKind::PairPuzzle | TaskKind::GroupPuzzle => {
                let unit = self.screen.unit_for_phase()?;
                if !self.is_submitter(class, &unit.partners) {
                    return None;
                }
                let code = if task.kind == TaskKind::PairPuzzle {
                    self.pair_code(class, &unit.partners)?
                } else {
                    s.group_tasks
                        .iter()
                        .find(|t| t.prompt == task.prompt)?
                        .code
                        .clone()
                };
                let wrong = if code == "0000" { "1111" } else { "0000" };
                Some(
                    Action::new(format!("code/{}", unit.id), PuzzleSubmit { code })
                        .or_wrong(PuzzleSubmit { code: wrong.into() }),
                )
            }
            _ => None,
        }
    }

    /// The lowest-id connected member enters the code for the unit.
    fn is_submitter(&self, class: &Class<'_>, partners: &[PlayerId]) -> bool {
        !partners
            .iter()
            .any(|p| p < &self.id && class.bots.get(p).is_some_and(|b| b.connected))
    }

    /// Reads the pair code off the code sheet using the clues both partners found.
    fn pair_code(&self, class: &Class<'_>, partners: &[PlayerId]) -> Option<String> {
        let s = class.scenario;
        let mut sets: BTreeMap<Track, BTreeSet<ArtifactId>> = BTreeMap::new();
        let screens = std::iter::once(&self.screen).chain(
            partners
                .iter()
                .filter_map(|p| class.bots.get(p))
                .map(|b| &b.screen),
        );
        for screen in screens {
            for r in &screen.reveals {
                if let Some(t) = s.artifact(r.artifact_id.as_str()).and_then(|a| a.track) {
                    sets.entry(t).or_default().insert(r.artifact_id.clone());
                }
            }
        }
        let a = sets.remove(&Track::A).unwrap_or_default();
        let b = sets.remove(&Track::B).unwrap_or_default();
        if let Ok(entry) = derive_pair_code(s, &a, &b) {
            return Some(entry.code.clone());
        }
        let plan = |t| -> BTreeSet<ArtifactId> {
            s.plan_artifacts(t)
                .into_iter()
                .map(|a| a.artifact_id.clone())
                .collect()
        };
        derive_pair_code(s, &plan(Track::A), &plan(Track::B))
            .ok()
            .map(|e| e.code.clone())
    }

    /// A receiver types in the token shown on each sender partner's phone.
    fn handshake(&self, class: &Class<'_>) -> Option<Action> {
        let unit = self.screen.unit_for_phase()?;
        if unit.role != HandshakeRole::Receiver {
            return None;
        }
        unit.partners.iter().find_map(|p| {
            let other = class
                .bots
                .get(p)
                .filter(|b| b.connected && b.screen.joined)?;
            let theirs = other.screen.unit_for_phase().filter(|u| u.id == unit.id)?;
            if theirs.role != HandshakeRole::Sender {
                return None;
            }
            let token = theirs.token.clone()?;
            let key = format!("prox/{}/{p}/{token}", unit.id);
            (!self.done.contains(&key)).then(|| {
                Action::new(key, Proximity { code: token }).or_wrong(Proximity {
                    code: "ZZZZ".into(),
                })
            })
        })
    }
}

/// The marker listed after `m`, as a plausible mis-scan.
fn wrong_marker(s: &Scenario, m: &MarkerId) -> Option<MarkerId> {
    let i = s.markers.iter().position(|d| &d.marker_id == m)?;
    let next = &s.markers[(i + 1) % s.markers.len()].marker_id;
    (next != m).then(|| next.clone())
}

//! The transition function. One event in, ordered effects out.

use std::collections::BTreeSet;

use super::assign::{self, deal_diary};
use super::event::{Effect, Event};
use super::state::{ChallengeState, SessionState, Unit};
use super::view::{current_task, resync_view};
use super::{derive_pair_code, UnitKind};
use crate::ids::{ArtifactId, MarkerId, PlayerId, UnitId};
use crate::phase::PhaseId;
use crate::protocol::{
    self, codes, Body, ChallengeUpdate, Choreography, DiaryAssign, DiaryLine, ErrorMsg,
    FacilitatorCmd, FragmentView, GroupAssign, HandshakeRole, Hint, JoinAck, MemberView,
    PairAssign, PhaseChange, ProximityMatch, PuzzleResult, PuzzleTask, ReadTurn, Resync, Reveal,
    Role, TaskKind, TeacherInfo,
};
use crate::scenario::{ArtifactDef, Scenario, Speaker, Track};

pub(crate) const CHALLENGE_TIMER: &str = "challenge";

pub(crate) fn hint_timer(kind: HintTarget, id: &str) -> String {
    let k = match kind {
        HintTarget::Player => "player",
        HintTarget::Pair => "pair",
        HintTarget::Group => "group",
    };
    format!("hint/{k}/{id}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum HintTarget {
    Player,
    Pair,
    Group,
}

/// Handshake edges `(receiver, sender)` a unit must confirm. In a pair the
/// track-B members receive from the track-A members; in a group the first
/// member receives from everyone else.
pub(crate) fn required_edges(
    state: &SessionState,
    unit: &Unit,
    kind: UnitKind,
) -> Vec<(PlayerId, PlayerId)> {
    match kind {
        UnitKind::Pair => {
            let of = |t: Track| -> Vec<&PlayerId> {
                unit.members
                    .iter()
                    .filter(|m| state.players.get(*m).is_some_and(|p| p.track == t))
                    .collect()
            };
            let (senders, receivers) = (of(Track::A), of(Track::B));
            receivers
                .iter()
                .flat_map(|r| senders.iter().map(move |s| ((*r).clone(), (*s).clone())))
                .collect()
        }
        UnitKind::Group => match unit.members.split_first() {
            Some((r, rest)) => rest.iter().map(|s| (r.clone(), s.clone())).collect(),
            None => Vec::new(),
        },
    }
}

pub(crate) fn handshake_role(
    state: &SessionState,
    unit: &Unit,
    kind: UnitKind,
    player: &PlayerId,
) -> HandshakeRole {
    let receiver = required_edges(state, unit, kind)
        .iter()
        .any(|(r, _)| r == player);
    if receiver {
        HandshakeRole::Receiver
    } else {
        HandshakeRole::Sender
    }
}

/// All handshake edges between connected members are confirmed.
pub(crate) fn formation_done(state: &SessionState, unit: &Unit, kind: UnitKind) -> bool {
    required_edges(state, unit, kind)
        .into_iter()
        .filter(|(r, s)| state.is_connected(r) && state.is_connected(s))
        .all(|e| unit.confirmed.contains(&e))
}

pub(crate) fn plan_complete(s: &Scenario, state: &SessionState, player: &PlayerId) -> bool {
    let Some(p) = state.players.get(player) else {
        return true;
    };
    s.plan_artifacts(p.track)
        .iter()
        .all(|a| p.has_discovered(&a.artifact_id))
}

fn line_ackers(state: &SessionState, speaker: Speaker) -> Vec<PlayerId> {
    let mut v = Vec::new();
    if matches!(speaker, Speaker::Teacher | Speaker::All) {
        v.push(state.teacher.player_id.clone());
    }
    if matches!(speaker, Speaker::Player | Speaker::All) {
        v.extend(state.players.keys().cloned());
    }
    v
}

/// Whether the barrier of the current phase has passed.
pub(crate) fn phase_complete(s: &Scenario, state: &SessionState) -> bool {
    let any_connected = state.connected_players().next().is_some();
    match state.phase {
        PhaseId::Lobby | PhaseId::Discussion | PhaseId::Ended => false,
        PhaseId::RegisterRoleplay => state.script_cursor >= s.roleplay_script.len(),
        PhaseId::NotepadDiscovery => {
            any_connected && state.connected_players().all(|p| p.notepad_opened)
        }
        PhaseId::IndividualDiscovery => {
            any_connected
                && state
                    .connected_players()
                    .all(|p| plan_complete(s, state, &p.player_id))
        }
        PhaseId::PairFormation => {
            any_connected
                && state
                    .pairs
                    .iter()
                    .all(|p| formation_done(state, &p.unit, UnitKind::Pair))
        }
        PhaseId::PairPuzzle => {
            any_connected
                && state
                    .pairs
                    .iter()
                    .filter(|p| state.unit_has_connected(&p.unit))
                    .all(|p| p.unit.puzzle_done())
        }
        PhaseId::GroupFormation => {
            any_connected
                && state
                    .groups
                    .iter()
                    .all(|g| formation_done(state, &g.unit, UnitKind::Group))
        }
        PhaseId::GroupPuzzle => {
            any_connected
                && state
                    .groups
                    .iter()
                    .filter(|g| state.unit_has_connected(&g.unit))
                    .all(|g| g.unit.puzzle_done())
        }
        PhaseId::TeacherShare => {
            any_connected
                && state
                    .groups
                    .iter()
                    .filter(|g| state.unit_has_connected(&g.unit))
                    .all(|g| g.teacher_visited)
        }
        PhaseId::TimedChallenge => state.challenge.as_ref().is_some_and(|c| c.finished),
        PhaseId::DiaryCircle => state.read_cursor >= s.diary.len(),
    }
}

/// Whether `player` still owes something to the current phase.
pub fn has_pending_obligation(s: &Scenario, state: &SessionState, player: &PlayerId) -> bool {
    let Some(p) = state.players.get(player) else {
        return false;
    };
    match state.phase {
        PhaseId::Lobby | PhaseId::Ended => false,
        // Collective activities: the whole class takes part until they end.
        PhaseId::TimedChallenge | PhaseId::DiaryCircle | PhaseId::Discussion => true,
        PhaseId::RegisterRoleplay => s.roleplay_script.get(state.script_cursor).is_some_and(|l| {
            l.ack_required
                && line_ackers(state, l.speaker).contains(player)
                && !state.line_acks.contains(player)
        }),
        PhaseId::NotepadDiscovery => !p.notepad_opened,
        PhaseId::IndividualDiscovery => !plan_complete(s, state, player),
        PhaseId::PairFormation => state
            .pair_of(player)
            .is_some_and(|u| !formation_done(state, &u.unit, UnitKind::Pair)),
        PhaseId::PairPuzzle => state.pair_of(player).is_some_and(|u| !u.unit.puzzle_done()),
        PhaseId::GroupFormation => state
            .group_of(player)
            .is_some_and(|g| !formation_done(state, &g.unit, UnitKind::Group)),
        PhaseId::GroupPuzzle | PhaseId::TeacherShare => {
            state.group_of(player).is_some_and(|g| !g.teacher_visited)
        }
    }
}

pub(crate) struct Machine<'a> {
    pub s: &'a Scenario,
    pub st: &'a mut SessionState,
    pub fx: Vec<Effect>,
}

impl<'a> Machine<'a> {
    pub fn new(s: &'a Scenario, st: &'a mut SessionState) -> Self {
        Self {
            s,
            st,
            fx: Vec::new(),
        }
    }

    // ---- effect helpers -------------------------------------------------

    fn send<I>(&mut self, to: I, msg: impl Into<Body>)
    where
        I: IntoIterator<Item = PlayerId>,
    {
        let to: Vec<PlayerId> = to.into_iter().collect();
        if !to.is_empty() {
            self.fx.push(Effect::SendTo {
                to,
                msg: msg.into(),
            });
        }
    }

    fn send1(&mut self, to: &PlayerId, msg: impl Into<Body>) {
        self.send([to.clone()], msg);
    }

    fn broadcast(&mut self, msg: impl Into<Body>) {
        self.fx.push(Effect::Broadcast { msg: msg.into() });
    }

    fn error(&mut self, to: &PlayerId, code: &str, message: impl Into<String>) {
        self.send1(to, ErrorMsg::new(code, message));
    }

    fn illegal(&mut self, to: &PlayerId, what: &str) {
        let msg = format!("{what} is not allowed during {}", self.st.phase);
        self.error(to, codes::ILLEGAL_IN_PHASE, msg);
    }

    fn arm(&mut self, timer: String, delay_ms: u64) {
        self.st
            .armed_timers
            .insert(timer.clone(), self.st.virtual_now + delay_ms);
        self.fx.push(Effect::ArmTimer { timer, delay_ms });
    }

    fn cancel(&mut self, timer: &str) {
        if self.st.armed_timers.remove(timer).is_some() {
            self.fx.push(Effect::CancelTimer {
                timer: timer.to_owned(),
            });
        }
    }

    fn cancel_all_timers(&mut self) {
        let ids: Vec<String> = self.st.armed_timers.keys().cloned().collect();
        for id in ids {
            self.cancel(&id);
        }
    }

    fn lead_time(&self) -> u64 {
        self.st.virtual_now + self.st.config.choreography_lead_ms
    }

    // ---- entry point ----------------------------------------------------

    pub fn apply(&mut self, event: &Event) {
        self.st.event_seq += 1;
        if let Some(who) = event.issuer() {
            if !self.st.knows(who) {
                let who = who.clone();
                self.error(
                    &who,
                    codes::UNKNOWN_IDENTITY,
                    format!("\"{who}\" is not on this session's roster"),
                );
                return;
            }
            if self.st.paused && event.is_gameplay() {
                let who = who.clone();
                self.error(&who, codes::ILLEGAL_IN_PHASE, "the session is paused");
                return;
            }
        }
        match event {
            Event::Join { player } => self.on_join(player),
            Event::Leave { player } => self.on_leave(player),
            Event::Facilitator { player, cmd } => self.on_facilitator(player, cmd),
            Event::RoleAck { player, line } => self.on_role_ack(player, *line),
            Event::Scan { player, marker } => self.on_scan(player, marker),
            Event::Proximity { player, code } => self.on_proximity(player, code),
            Event::PuzzleSubmit { player, code } => self.on_submit(player, code),
            Event::TeacherShareDone { player, group } => self.on_teacher_share(player, group),
            Event::ChallengeScan { player, marker } => self.on_challenge_scan(player, marker),
            Event::ReadDone { player, order } => self.on_read_done(player, *order),
            Event::TimerFired { timer } => {
                if !self.st.paused && self.st.armed_timers.remove(timer).is_some() {
                    self.fire(timer);
                }
            }
            Event::ClockAdvance { ms } => self.on_clock(*ms),
        }
        self.settle();
        self.refresh_idle();
    }

    fn refresh_idle(&mut self) {
        let now = self.st.virtual_now;
        let ids: Vec<PlayerId> = self.st.players.keys().cloned().collect();
        for id in ids {
            let pending = has_pending_obligation(self.s, self.st, &id);
            let p = self.st.players.get_mut(&id).expect("listed");
            match (pending || !p.connected, p.idle_since) {
                (true, Some(_)) => p.idle_since = None,
                (false, None) => p.idle_since = Some(now),
                _ => {}
            }
        }
    }

    // ---- phase machine ----------------------------------------------------

    fn settle(&mut self) {
        loop {
            if self.st.phase == PhaseId::RegisterRoleplay {
                self.advance_script();
            }
            if self.st.paused || !phase_complete(self.s, self.st) {
                break;
            }
            match self.st.phase.next() {
                Some(next) => self.enter(next),
                None => break,
            }
        }
    }

    fn advance_script(&mut self) {
        while let Some(line) = self.s.roleplay_script.get(self.st.script_cursor) {
            if line.ack_required {
                let waiting = line_ackers(self.st, line.speaker)
                    .into_iter()
                    .filter(|id| self.st.is_connected(id))
                    .any(|id| !self.st.line_acks.contains(&id));
                let anyone = line_ackers(self.st, line.speaker)
                    .iter()
                    .any(|id| self.st.is_connected(id));
                if waiting || !anyone {
                    break;
                }
            }
            self.st.script_cursor += 1;
            self.st.line_acks.clear();
            self.announce_line();
        }
    }

    fn announce_line(&mut self) {
        if let Some(line) = self.s.roleplay_script.get(self.st.script_cursor) {
            let task = PuzzleTask {
                kind: TaskKind::Roleplay,
                unit_id: None,
                prompt: line.prompt_text.clone(),
                target: None,
                line: Some(self.st.script_cursor),
            };
            self.broadcast(task);
        }
    }

    fn enter(&mut self, phase: PhaseId) {
        self.leave_phase();
        self.st.phase = phase;
        let message = match phase {
            PhaseId::Lobby => "Waiting for the class",
            PhaseId::RegisterRoleplay => "Morning register: follow the prompts on your screen",
            PhaseId::NotepadDiscovery => "You have a message. Look under your desk",
            PhaseId::IndividualDiscovery => "Follow your notepad to the marked places",
            PhaseId::PairFormation => "Find your partner and touch phones",
            PhaseId::PairPuzzle => "Solve the puzzle together",
            PhaseId::GroupFormation => "Find your new group",
            PhaseId::GroupPuzzle => "Solve the group puzzle, then visit your teacher",
            PhaseId::TeacherShare => "Share what you learnt with your teacher",
            PhaseId::TimedChallenge => "Find every marker in the classroom before time runs out",
            PhaseId::DiaryCircle => "Form a circle and read your page of the diary",
            PhaseId::Discussion => "Return to your desk and be yourself again",
            PhaseId::Ended => "Thank you for playing",
        };
        self.broadcast(PhaseChange {
            phase,
            paused: self.st.paused,
            message: message.into(),
        });
        self.fx.push(Effect::WriteCheckpoint);
        match phase {
            PhaseId::RegisterRoleplay => {
                self.st.script_cursor = 0;
                self.st.line_acks.clear();
                self.announce_line();
            }
            PhaseId::NotepadDiscovery => {
                let ids: Vec<PlayerId> = self.st.players.keys().cloned().collect();
                self.send(
                    ids,
                    PuzzleTask {
                        kind: TaskKind::Notepad,
                        unit_id: None,
                        prompt: "You have a message: look under your desk".into(),
                        target: None,
                        line: None,
                    },
                );
            }
            PhaseId::IndividualDiscovery => self.enter_discovery(),
            PhaseId::PairFormation => self.enter_pair_formation(),
            PhaseId::PairPuzzle => self.enter_pair_puzzle(),
            PhaseId::GroupFormation => self.enter_group_formation(),
            PhaseId::GroupPuzzle => self.enter_group_puzzle(),
            PhaseId::TeacherShare => {
                let waiting: Vec<String> = self
                    .st
                    .groups
                    .iter()
                    .filter(|g| !g.teacher_visited)
                    .map(|g| g.unit.id.to_string())
                    .collect();
                let teacher = self.st.teacher.player_id.clone();
                self.send1(
                    &teacher,
                    TeacherInfo {
                        group_id: None,
                        text: format!("Groups still to visit you: {}", waiting.join(", ")),
                        fragment: None,
                        prompts: Vec::new(),
                    },
                );
            }
            PhaseId::TimedChallenge => self.enter_challenge(),
            PhaseId::DiaryCircle => self.enter_diary(),
            PhaseId::Discussion => {
                self.choreography("return_to_desk", self.st.config.choreography_lead_ms);
                let teacher = self.st.teacher.player_id.clone();
                self.send1(
                    &teacher,
                    TeacherInfo {
                        group_id: None,
                        text: "Discussion questions".into(),
                        fragment: None,
                        prompts: self.s.discussion_prompts.clone(),
                    },
                );
            }
            PhaseId::Lobby | PhaseId::Ended => {}
        }
    }

    /// Exit actions of the current phase: stale timers go, hint levels reset.
    fn leave_phase(&mut self) {
        self.cancel_all_timers();
        for p in self.st.players.values_mut() {
            p.hint_level = 0;
        }
        for u in self.st.pairs.iter_mut().map(|p| &mut p.unit) {
            u.hint_level = 0;
            u.wrong_streak = 0;
        }
        for u in self.st.groups.iter_mut().map(|g| &mut g.unit) {
            u.hint_level = 0;
            u.wrong_streak = 0;
        }
    }

    /// Facilitator skip: finish whatever the current phase still owes so the
    /// next phase starts from a consistent state.
    fn force_complete(&mut self) {
        match self.st.phase {
            PhaseId::RegisterRoleplay => self.st.script_cursor = self.s.roleplay_script.len(),
            PhaseId::NotepadDiscovery => {
                for p in self.st.players.values_mut() {
                    p.notepad_opened = true;
                }
            }
            PhaseId::IndividualDiscovery => {
                let ids: Vec<PlayerId> = self.st.players.keys().cloned().collect();
                for id in ids {
                    self.catch_up(&id);
                }
            }
            PhaseId::PairFormation => {
                for i in 0..self.st.pairs.len() {
                    let edges = required_edges(self.st, &self.st.pairs[i].unit, UnitKind::Pair);
                    self.st.pairs[i].unit.confirmed.extend(edges);
                }
            }
            PhaseId::PairPuzzle => {
                for i in 0..self.st.pairs.len() {
                    self.st.pairs[i].unit.solved = true;
                    self.collect_unlock(UnitKind::Pair, i);
                }
            }
            PhaseId::GroupFormation => {
                for i in 0..self.st.groups.len() {
                    let edges = required_edges(self.st, &self.st.groups[i].unit, UnitKind::Group);
                    self.st.groups[i].unit.confirmed.extend(edges);
                }
            }
            PhaseId::GroupPuzzle | PhaseId::TeacherShare => {
                for i in 0..self.st.groups.len() {
                    self.st.groups[i].unit.solved = true;
                    self.collect_unlock(UnitKind::Group, i);
                    self.share_with_group(i);
                }
            }
            PhaseId::TimedChallenge => {
                if let Some(c) = self.st.challenge.as_mut() {
                    c.finished = true;
                }
            }
            PhaseId::DiaryCircle => self.st.read_cursor = self.s.diary.len(),
            PhaseId::Lobby | PhaseId::Discussion | PhaseId::Ended => {}
        }
    }

    // ---- phase entries ----------------------------------------------------

    fn hint_delay_ms(&self, phase: PhaseId) -> Option<u64> {
        let rule = self.s.hint_policy.for_phase(phase)?;
        if rule.hints.is_empty() {
            return None;
        }
        let secs = self
            .st
            .config
            .hint_delays
            .get(&phase)
            .copied()
            .unwrap_or(rule.delay_seconds);
        Some(secs * 1000)
    }

    fn enter_discovery(&mut self) {
        let ids: Vec<PlayerId> = self.st.players.keys().cloned().collect();
        let delay = self.hint_delay_ms(PhaseId::IndividualDiscovery);
        for id in ids {
            let target = self.next_plan_target(&id);
            self.st.players.get_mut(&id).expect("listed").current_target = target.clone();
            if let Some(task) = current_task(self.s, self.st, &id) {
                self.send1(&id, task);
            }
            if let (Some(d), Some(_)) = (delay, target) {
                self.arm(hint_timer(HintTarget::Player, id.as_str()), d);
            }
        }
    }

    fn next_plan_target(&self, id: &PlayerId) -> Option<MarkerId> {
        let p = self.st.players.get(id)?;
        self.s
            .plan_artifacts(p.track)
            .into_iter()
            .find(|a| !p.has_discovered(&a.artifact_id))
            .map(|a| a.marker_id.clone())
    }

    fn reissue_tokens(&mut self) {
        for p in self.st.players.values() {
            if let Some(t) = &p.pair_token {
                self.st.retired_tokens.insert(t.clone(), p.token_epoch);
            }
        }
        self.st.token_epoch += 1;
        let ids: Vec<PlayerId> = self.st.players.keys().cloned().collect();
        let tokens = assign::generate_tokens(
            &ids,
            self.st.rng_seed,
            self.st.token_epoch,
            &self.st.retired_tokens,
        );
        let epoch = self.st.token_epoch;
        for (id, t) in tokens {
            let p = self.st.players.get_mut(&id).expect("listed");
            p.pair_token = Some(t);
            p.token_epoch = epoch;
        }
    }

    fn member_views(&self, members: &[PlayerId], except: &PlayerId) -> Vec<MemberView> {
        members
            .iter()
            .filter(|m| *m != except)
            .map(|m| MemberView {
                player_id: m.clone(),
                persona_name: self.st.players[m].persona_name.clone(),
            })
            .collect()
    }

    fn enter_pair_formation(&mut self) {
        self.reissue_tokens();
        let pairs = assign::assign_pairs(self.st);
        for p in self.st.players.values_mut() {
            p.pair_id = None;
        }
        for pair in &pairs {
            for m in &pair.unit.members {
                self.st.players.get_mut(m).expect("member").pair_id = Some(pair.unit.id.clone());
            }
        }
        self.st.pairs = pairs;
        let delay = self.hint_delay_ms(PhaseId::PairFormation);
        for i in 0..self.st.pairs.len() {
            let unit = self.st.pairs[i].unit.clone();
            for m in &unit.members {
                let msg = PairAssign {
                    pair_id: unit.id.clone(),
                    partners: self.member_views(&unit.members, m),
                    token: self.st.players[m].pair_token.clone().unwrap_or_default(),
                    role: handshake_role(self.st, &unit, UnitKind::Pair, m),
                    epoch: self.st.token_epoch,
                };
                self.send1(m, msg);
            }
            if let Some(d) = delay {
                self.arm(hint_timer(HintTarget::Pair, unit.id.as_str()), d);
            }
        }
    }

    fn enter_pair_puzzle(&mut self) {
        let delay = self.hint_delay_ms(PhaseId::PairPuzzle);
        for i in 0..self.st.pairs.len() {
            let unit = self.st.pairs[i].unit.clone();
            // Each member's track plan is complete by now (catch-up covers
            // members who missed discovery), so the pair's knowledge is the
            // union of its tracks' plans.
            let tracks: BTreeSet<Track> = unit
                .members
                .iter()
                .map(|m| self.st.players[m].track)
                .collect();
            let plan = |t: Track| -> BTreeSet<ArtifactId> {
                if tracks.contains(&t) {
                    self.s
                        .plan_artifacts(t)
                        .into_iter()
                        .map(|a| a.artifact_id.clone())
                        .collect()
                } else {
                    BTreeSet::new()
                }
            };
            match derive_pair_code(self.s, &plan(Track::A), &plan(Track::B)) {
                Ok(entry) => {
                    let u = &mut self.st.pairs[i].unit;
                    u.code = Some(entry.code.clone());
                    u.unlock_marker = Some(entry.unlocks_marker.clone());
                }
                Err(e) => {
                    // Validation rules this out; keep the class moving.
                    let u = &mut self.st.pairs[i].unit;
                    u.solved = true;
                    self.st.fault = Some(format!("pair {}: {e}", unit.id));
                    let teacher = self.st.teacher.player_id.clone();
                    self.error(&teacher, codes::NO_MATCHING_ENTRY, e.to_string());
                    continue;
                }
            }
            for m in &unit.members {
                if let Some(task) = current_task(self.s, self.st, m) {
                    self.send1(m, task);
                }
            }
            if let Some(d) = delay {
                self.arm(hint_timer(HintTarget::Pair, unit.id.as_str()), d);
            }
        }
    }

    fn enter_group_formation(&mut self) {
        self.reissue_tokens();
        let groups = assign::assign_groups(self.st);
        for p in self.st.players.values_mut() {
            p.group_id = None;
        }
        for g in &groups {
            for m in &g.unit.members {
                self.st.players.get_mut(m).expect("member").group_id = Some(g.unit.id.clone());
            }
        }
        self.st.groups = groups;
        let delay = self.hint_delay_ms(PhaseId::GroupFormation);
        for i in 0..self.st.groups.len() {
            let unit = self.st.groups[i].unit.clone();
            for m in &unit.members {
                let msg = GroupAssign {
                    group_id: unit.id.clone(),
                    members: self.member_views(&unit.members, m),
                    token: self.st.players[m].pair_token.clone().unwrap_or_default(),
                    role: handshake_role(self.st, &unit, UnitKind::Group, m),
                    epoch: self.st.token_epoch,
                };
                self.send1(m, msg);
            }
            if let Some(d) = delay {
                self.arm(hint_timer(HintTarget::Group, unit.id.as_str()), d);
            }
        }
    }

    fn enter_group_puzzle(&mut self) {
        let delay = self.hint_delay_ms(PhaseId::GroupPuzzle);
        for i in 0..self.st.groups.len() {
            let task = self.s.group_task(self.st.groups[i].task_index).cloned();
            let unit = &mut self.st.groups[i].unit;
            match task {
                Some(t) => {
                    unit.code = Some(t.code.clone());
                    unit.unlock_marker = t.unlocks_marker.clone();
                }
                None => unit.solved = true,
            }
            let unit = unit.clone();
            for m in &unit.members {
                if let Some(task) = current_task(self.s, self.st, m) {
                    self.send1(m, task);
                }
            }
            if unit.puzzle_done() {
                self.group_ready(i);
            } else if let Some(d) = delay {
                self.arm(hint_timer(HintTarget::Group, unit.id.as_str()), d);
            }
        }
    }

    fn enter_challenge(&mut self) {
        let secs = self
            .st
            .config
            .challenge_seconds
            .unwrap_or(self.s.challenge_seconds);
        let deadline = self.st.virtual_now + secs * 1000;
        self.st.challenge = Some(ChallengeState {
            deadline,
            scanned: self
                .s
                .markers
                .iter()
                .map(|m| (m.marker_id.clone(), 0))
                .collect(),
            complete: false,
            finished: false,
        });
        self.arm(CHALLENGE_TIMER.into(), secs * 1000);
        self.broadcast_challenge();
        // Every phone plays its own voice of the soundscape, in sync.
        let start_at = self.lead_time();
        let cues: Vec<(PlayerId, String)> = self
            .st
            .players
            .values()
            .filter_map(|p| p.instrument.clone().map(|i| (p.player_id.clone(), i)))
            .collect();
        for (id, cue) in cues {
            self.send1(
                &id,
                protocol::AudioCue {
                    cue,
                    start_at,
                    artifact_id: None,
                },
            );
        }
    }

    fn broadcast_challenge(&mut self) {
        if let Some(c) = &self.st.challenge {
            let msg = ChallengeUpdate {
                deadline: c.deadline,
                scanned: c.scanned.values().filter(|&&n| n > 0).count(),
                total: c.scanned.len(),
                complete: c.complete,
                finished: c.finished,
            };
            self.broadcast(msg);
        }
    }

    fn diary_holders(&self) -> Vec<PlayerId> {
        let mut v: Vec<(u64, PlayerId)> = self
            .st
            .connected_players()
            .map(|p| (p.join_rank.unwrap_or(u64::MAX), p.player_id.clone()))
            .collect();
        v.sort();
        v.into_iter().map(|(_, id)| id).collect()
    }

    fn enter_diary(&mut self) {
        self.choreography("form_circle", self.st.config.choreography_lead_ms);
        let orders: Vec<usize> = self.s.diary_in_order().iter().map(|d| d.order).collect();
        let mut holders = self.diary_holders();
        if holders.is_empty() {
            holders.push(self.st.teacher.player_id.clone());
        }
        self.st.diary_assignment = deal_diary(&orders, &holders);
        self.st.read_cursor = 0;
        let assignment = self.st.diary_assignment.clone();
        for (holder, orders) in assignment {
            let lines = orders
                .iter()
                .map(|&o| DiaryLine {
                    order: o,
                    text: self.s.diary_text(o).unwrap_or_default().to_owned(),
                })
                .collect();
            self.send1(&holder, DiaryAssign { fragments: lines });
        }
        self.announce_read_turn();
    }

    fn announce_read_turn(&mut self) {
        let order = self.st.read_cursor;
        if let Some(holder) = self.st.diary_holder(order).cloned() {
            self.broadcast(ReadTurn { order, holder });
        }
    }

    /// Broadcasts a physical instruction all phones execute at the same
    /// virtual instant.
    pub(crate) fn choreography(&mut self, action: &str, lead_ms: u64) {
        let execute_at = self.st.virtual_now + lead_ms;
        self.broadcast(Choreography {
            action: action.into(),
            execute_at,
        });
    }

    // ---- event handlers -------------------------------------------------

    fn on_join(&mut self, id: &PlayerId) {
        let first_time;
        if self.st.is_teacher(id) {
            first_time = self.st.teacher.join_rank.is_none();
            if first_time {
                self.st.teacher.join_rank = Some(self.st.joins);
                self.st.joins += 1;
            }
            self.st.teacher.connected = true;
            let ack = JoinAck {
                player_id: id.clone(),
                role: Role::Facilitator,
                persona_name: self.st.teacher.persona_name.clone(),
                instrument: None,
                phase: self.st.phase,
            };
            self.send1(id, ack);
        } else {
            let joins = self.st.joins;
            let p = self.st.players.get_mut(id).expect("known identity");
            first_time = p.join_rank.is_none();
            if first_time {
                p.join_rank = Some(joins);
                self.st.joins += 1;
            }
            p.connected = true;
            let ack = JoinAck {
                player_id: id.clone(),
                role: Role::Player,
                persona_name: p.persona_name.clone(),
                instrument: p.instrument.clone(),
                phase: self.st.phase,
            };
            self.send1(id, ack);
            if self.st.phase > PhaseId::IndividualDiscovery {
                self.catch_up(id);
            }
        }
        if !first_time || self.st.phase != PhaseId::Lobby {
            let view = resync_view(self.s, self.st, id).expect("known identity");
            self.send1(id, Resync { view });
        }
    }

    fn on_leave(&mut self, id: &PlayerId) {
        if self.st.is_teacher(id) {
            self.st.teacher.connected = false;
            return;
        }
        let now = self.st.virtual_now;
        if let Some(p) = self.st.players.get_mut(id) {
            p.connected = false;
            p.idle_since.get_or_insert(now);
        }
        if self.st.phase == PhaseId::DiaryCircle {
            self.reassign_diary(id);
        }
        if self.st.phase == PhaseId::PairPuzzle {
            if let Some(i) = self.unit_index(id, UnitKind::Pair) {
                let unit = &self.st.pairs[i].unit;
                let marker = unit.unlock_marker.clone();
                let someone_seeking = unit.members.iter().any(|m| {
                    self.st.is_connected(m) && self.st.players[m].current_target == marker
                });
                if !someone_seeking {
                    self.hand_out_pair_unlock(i);
                }
            }
        }
    }

    /// Unread diary pages of a player who left go to the teacher (or the
    /// first connected reader if the teacher is away too).
    fn reassign_diary(&mut self, leaver: &PlayerId) {
        let cursor = self.st.read_cursor;
        let Some(orders) = self.st.diary_assignment.get_mut(leaver) else {
            return;
        };
        let unread: Vec<usize> = orders.iter().copied().filter(|&o| o >= cursor).collect();
        if unread.is_empty() {
            return;
        }
        orders.retain(|&o| o < cursor);
        let heir = if self.st.teacher.connected {
            Some(self.st.teacher.player_id.clone())
        } else {
            self.diary_holders().into_iter().next()
        };
        let Some(heir) = heir else {
            self.st
                .diary_assignment
                .get_mut(leaver)
                .expect("present")
                .extend(unread);
            return;
        };
        if self.st.diary_assignment[leaver].is_empty() {
            self.st.diary_assignment.remove(leaver);
        }
        let entry = self.st.diary_assignment.entry(heir.clone()).or_default();
        entry.extend(unread.iter().copied());
        entry.sort_unstable();
        let lines = unread
            .iter()
            .map(|&o| DiaryLine {
                order: o,
                text: self.s.diary_text(o).unwrap_or_default().to_owned(),
            })
            .collect();
        self.send1(&heir, DiaryAssign { fragments: lines });
        if unread.contains(&cursor) {
            self.announce_read_turn();
        }
    }

    /// Replays discoveries a player missed while away.
    fn catch_up(&mut self, id: &PlayerId) {
        let Some(p) = self.st.players.get(id) else {
            return;
        };
        let missing: Vec<ArtifactDef> = self
            .s
            .plan_artifacts(p.track)
            .into_iter()
            .filter(|a| !p.has_discovered(&a.artifact_id))
            .cloned()
            .collect();
        for a in missing {
            self.reveal(id, &a, true, false);
        }
        self.st.players.get_mut(id).expect("listed").current_target = None;
    }

    /// Records `artifact` as discovered by `id` and sends the reveal.
    fn reveal(&mut self, id: &PlayerId, artifact: &ArtifactDef, catch_up: bool, cue: bool) {
        let p = self.st.players.get_mut(id).expect("known player");
        if p.has_discovered(&artifact.artifact_id) {
            return;
        }
        p.discovered.push(artifact.artifact_id.clone());
        let next_target = if self.st.phase == PhaseId::IndividualDiscovery && !catch_up {
            self.next_plan_target(id)
        } else {
            None
        };
        let fragments = artifact
            .fragment_ids
            .iter()
            .filter_map(|f| self.s.fragment(f.as_str()))
            .map(|f| FragmentView {
                fragment_id: f.fragment_id.clone(),
                text: f.text.clone(),
            })
            .collect();
        self.send1(
            id,
            Reveal {
                artifact_id: artifact.artifact_id.clone(),
                reveal_text: artifact.reveal_text.clone(),
                fragments,
                next_target,
                catch_up,
            },
        );
        if cue {
            if let Some(c) = &artifact.audio_cue {
                let start_at = self.st.virtual_now;
                self.send1(
                    id,
                    protocol::AudioCue {
                        cue: c.clone(),
                        start_at,
                        artifact_id: Some(artifact.artifact_id.clone()),
                    },
                );
            }
        }
    }

    fn on_facilitator(&mut self, who: &PlayerId, cmd: &FacilitatorCmd) {
        if !self.st.is_teacher(who) {
            self.error(
                who,
                codes::NOT_FACILITATOR,
                "only the facilitator may issue session commands",
            );
            return;
        }
        match cmd {
            FacilitatorCmd::Start => {
                if self.st.phase == PhaseId::Lobby {
                    self.enter(PhaseId::RegisterRoleplay);
                } else {
                    self.illegal(who, "start");
                }
            }
            FacilitatorCmd::Pause | FacilitatorCmd::Resume => {
                let pause = matches!(cmd, FacilitatorCmd::Pause);
                if self.st.paused != pause {
                    self.st.paused = pause;
                    self.broadcast(PhaseChange {
                        phase: self.st.phase,
                        paused: pause,
                        message: if pause { "Paused" } else { "Resumed" }.into(),
                    });
                }
            }
            FacilitatorCmd::SkipPhase => match self.st.phase.next() {
                Some(next) if self.st.phase != PhaseId::Lobby => {
                    self.force_complete();
                    self.enter(next);
                }
                Some(_) => self.enter(PhaseId::RegisterRoleplay),
                None => self.illegal(who, "skip_phase"),
            },
            FacilitatorCmd::Restore { .. } => self.error(
                who,
                codes::HOST_ONLY,
                "restore is handled by the hosting server",
            ),
            FacilitatorCmd::TeacherShareDone { group_id } => self.on_teacher_share(who, group_id),
        }
    }

    fn on_role_ack(&mut self, who: &PlayerId, line: usize) {
        match self.st.phase {
            PhaseId::RegisterRoleplay => {
                let Some(current) = self.s.roleplay_script.get(self.st.script_cursor) else {
                    return self.illegal(who, "role_ack");
                };
                if line != self.st.script_cursor {
                    let msg = format!(
                        "acknowledged line {line}, the current line is {}",
                        self.st.script_cursor
                    );
                    return self.error(who, codes::ILLEGAL_IN_PHASE, msg);
                }
                if !line_ackers(self.st, current.speaker).contains(who) {
                    return self.error(who, codes::ILLEGAL_IN_PHASE, "this line is not yours");
                }
                self.st.line_acks.insert(who.clone());
            }
            PhaseId::NotepadDiscovery if !self.st.is_teacher(who) => {
                self.st.players.get_mut(who).expect("known").notepad_opened = true;
            }
            _ => self.illegal(who, "role_ack"),
        }
    }

    fn on_scan(&mut self, who: &PlayerId, marker: &MarkerId) {
        if self.st.is_teacher(who) {
            return self.illegal(who, "scan");
        }
        match self.st.phase {
            PhaseId::IndividualDiscovery => {
                let p = &self.st.players[who];
                let track = p.track;
                if p.current_target.as_ref() == Some(marker) {
                    let artifact = self
                        .s
                        .plan_artifacts(track)
                        .into_iter()
                        .find(|a| &a.marker_id == marker)
                        .cloned()
                        .expect("targets come from the plan");
                    self.reveal(who, &artifact, false, true);
                    let next = self.next_plan_target(who);
                    self.st.players.get_mut(who).expect("known").current_target = next.clone();
                    let timer = hint_timer(HintTarget::Player, who.as_str());
                    self.cancel(&timer);
                    if next.is_some() {
                        if let Some(d) = self.hint_delay_ms(PhaseId::IndividualDiscovery) {
                            self.arm(timer, d);
                        }
                    }
                } else if self
                    .s
                    .artifacts_at(marker.as_str())
                    .any(|a| p.has_discovered(&a.artifact_id))
                {
                    // Already revealed: idempotent.
                } else {
                    self.wrong_marker(who);
                }
            }
            PhaseId::PairPuzzle => self.scan_unlock(who, marker, UnitKind::Pair),
            PhaseId::GroupPuzzle => self.scan_unlock(who, marker, UnitKind::Group),
            _ => self.illegal(who, "scan"),
        }
    }

    fn wrong_marker(&mut self, who: &PlayerId) {
        let hint = self.st.players[who]
            .current_target
            .as_ref()
            .and_then(|m| self.s.marker(m.as_str()))
            .map(|m| format!("Nothing here. Your notepad points to: {}", m.location_label))
            .unwrap_or_else(|| "Nothing here".into());
        self.error(who, codes::WRONG_MARKER, hint);
    }

    fn unit_index(&self, who: &PlayerId, kind: UnitKind) -> Option<usize> {
        let p = self.st.players.get(who)?;
        match kind {
            UnitKind::Pair => {
                let id = p.pair_id.as_ref()?;
                self.st.pairs.iter().position(|u| &u.unit.id == id)
            }
            UnitKind::Group => {
                let id = p.group_id.as_ref()?;
                self.st.groups.iter().position(|u| &u.unit.id == id)
            }
        }
    }

    fn unit(&self, kind: UnitKind, i: usize) -> &Unit {
        match kind {
            UnitKind::Pair => &self.st.pairs[i].unit,
            UnitKind::Group => &self.st.groups[i].unit,
        }
    }

    fn unit_mut(&mut self, kind: UnitKind, i: usize) -> &mut Unit {
        match kind {
            UnitKind::Pair => &mut self.st.pairs[i].unit,
            UnitKind::Group => &mut self.st.groups[i].unit,
        }
    }

    /// Points a solved pair's connected track-A members at the unlock
    /// marker (the number unlocks it on their screen). With no track-A member
    /// present, whoever is still connected gets the task instead.
    fn hand_out_pair_unlock(&mut self, i: usize) {
        let unit = self.st.pairs[i].unit.clone();
        let Some(m) = unit.unlock_marker.clone() else {
            return;
        };
        if !unit.solved || unit.unlocked.is_some() {
            return;
        }
        let present: Vec<PlayerId> = unit
            .members
            .iter()
            .filter(|p| self.st.is_connected(p))
            .cloned()
            .collect();
        let mut seekers: Vec<PlayerId> = present
            .iter()
            .filter(|p| self.st.players[*p].track == Track::A)
            .cloned()
            .collect();
        if seekers.is_empty() {
            seekers = present;
        }
        for p in &seekers {
            let player = self.st.players.get_mut(p).expect("member");
            if player.current_target.as_ref() == Some(&m) {
                continue;
            }
            player.current_target = Some(m.clone());
            if let Some(task) = current_task(self.s, self.st, p) {
                self.send1(p, task);
            }
        }
    }

    fn scan_unlock(&mut self, who: &PlayerId, marker: &MarkerId, kind: UnitKind) {
        let Some(i) = self.unit_index(who, kind) else {
            return self.illegal(who, "scan");
        };
        let unit = self.unit(kind, i);
        if !unit.solved || unit.unlock_marker.as_ref() != Some(marker) {
            return self.wrong_marker(who);
        }
        if unit.unlocked.is_some() {
            return;
        }
        self.collect_unlock(kind, i);
        if kind == UnitKind::Group {
            self.group_ready(i);
        }
    }

    /// Reveals the unit's unlock artifact to every member.
    fn collect_unlock(&mut self, kind: UnitKind, i: usize) {
        let unit = self.unit(kind, i).clone();
        if unit.unlocked.is_some() {
            return;
        }
        let Some(artifact) = unit
            .unlock_marker
            .as_ref()
            .and_then(|m| self.s.unlock_artifact_at(m.as_str()))
            .cloned()
        else {
            return;
        };
        self.unit_mut(kind, i).unlocked = Some(artifact.artifact_id.clone());
        for m in &unit.members {
            self.reveal(m, &artifact, false, true);
        }
        for m in &unit.members {
            self.st.players.get_mut(m).expect("member").current_target = None;
        }
    }

    fn on_proximity(&mut self, who: &PlayerId, code: &str) {
        let kind = match self.st.phase {
            PhaseId::PairFormation => UnitKind::Pair,
            PhaseId::GroupFormation => UnitKind::Group,
            _ => return self.illegal(who, "proximity"),
        };
        let Some(i) = self.unit_index(who, kind) else {
            return self.illegal(who, "proximity");
        };
        let result = match protocol::verify_proximity(self.st, who, code) {
            Ok(r) => r,
            Err(_) => return self.illegal(who, "proximity"),
        };
        let task_kind = match kind {
            UnitKind::Pair => TaskKind::PairHandshake,
            UnitKind::Group => TaskKind::GroupHandshake,
        };
        match result {
            ProximityMatch::Confirmed { partner } => {
                let newly = self
                    .unit_mut(kind, i)
                    .confirmed
                    .insert((who.clone(), partner.clone()));
                if !newly {
                    return;
                }
                let unit = self.unit(kind, i).clone();
                let done = formation_done(self.st, &unit, kind);
                let attempts = unit.submitted_attempts;
                let name = self.st.players[&partner].persona_name.clone();
                self.send(
                    [who.clone(), partner.clone()],
                    PuzzleResult {
                        unit_id: unit.id.clone(),
                        kind: task_kind,
                        correct: true,
                        attempts,
                        message: format!("Connected with {name}"),
                    },
                );
                if done {
                    let target = match kind {
                        UnitKind::Pair => HintTarget::Pair,
                        UnitKind::Group => HintTarget::Group,
                    };
                    self.cancel(&hint_timer(target, unit.id.as_str()));
                }
            }
            ProximityMatch::WrongPartner { nudge, .. } => {
                self.error(who, codes::WRONG_PARTNER, nudge);
                self.count_wrong(kind, i);
            }
        }
    }

    /// Counts a wrong attempt; a streak of them pulls the next hint forward.
    fn count_wrong(&mut self, kind: UnitKind, i: usize) {
        let limit = self.st.config.wrong_attempts_before_hint;
        let unit = self.unit_mut(kind, i);
        unit.submitted_attempts += 1;
        unit.wrong_streak += 1;
        if limit > 0 && unit.wrong_streak >= limit {
            unit.wrong_streak = 0;
            let target = match kind {
                UnitKind::Pair => HintTarget::Pair,
                UnitKind::Group => HintTarget::Group,
            };
            let id = self.unit(kind, i).id.to_string();
            self.deliver_hint(target, &id);
        }
    }

    fn on_submit(&mut self, who: &PlayerId, code: &str) {
        let kind = match self.st.phase {
            PhaseId::PairPuzzle => UnitKind::Pair,
            PhaseId::GroupPuzzle => UnitKind::Group,
            _ => return self.illegal(who, "puzzle_submit"),
        };
        let Some(i) = self.unit_index(who, kind) else {
            return self.illegal(who, "puzzle_submit");
        };
        let unit = self.unit(kind, i).clone();
        if unit.solved {
            return;
        }
        let task_kind = match kind {
            UnitKind::Pair => TaskKind::PairPuzzle,
            UnitKind::Group => TaskKind::GroupPuzzle,
        };
        if unit.code.as_deref() == Some(code.trim()) {
            let u = self.unit_mut(kind, i);
            u.solved = true;
            u.submitted_attempts += 1;
            let attempts = u.submitted_attempts;
            let target = match kind {
                UnitKind::Pair => HintTarget::Pair,
                UnitKind::Group => HintTarget::Group,
            };
            self.cancel(&hint_timer(target, unit.id.as_str()));
            self.send(
                unit.members.clone(),
                PuzzleResult {
                    unit_id: unit.id.clone(),
                    kind: task_kind,
                    correct: true,
                    attempts,
                    message: "Solved!".into(),
                },
            );
            let next = unit.unlock_marker.clone();
            if let Some(m) = &next {
                match kind {
                    UnitKind::Pair => self.hand_out_pair_unlock(i),
                    UnitKind::Group => {
                        for p in &unit.members {
                            self.st.players.get_mut(p).expect("member").current_target =
                                Some(m.clone());
                        }
                        for p in &unit.members {
                            if let Some(task) = current_task(self.s, self.st, p) {
                                self.send1(p, task);
                            }
                        }
                    }
                }
            } else if kind == UnitKind::Group {
                self.group_ready(i);
            }
        } else {
            let attempts = unit.submitted_attempts + 1;
            self.send(
                unit.members.clone(),
                PuzzleResult {
                    unit_id: unit.id.clone(),
                    kind: task_kind,
                    correct: false,
                    attempts,
                    message: "That number does not open anything. Compare your objects again."
                        .into(),
                },
            );
            self.count_wrong(kind, i);
        }
    }

    /// The group has finished its puzzle and walks over to the teacher.
    fn group_ready(&mut self, i: usize) {
        if self.st.groups[i].arrival_rank.is_some() {
            return;
        }
        self.st.groups[i].arrival_rank = Some(self.st.group_arrivals);
        self.st.group_arrivals += 1;
        let unit = self.st.groups[i].unit.clone();
        for m in &unit.members {
            if let Some(task) = current_task(self.s, self.st, m) {
                self.send1(m, task);
            }
        }
        let teacher = self.st.teacher.player_id.clone();
        self.send1(
            &teacher,
            TeacherInfo {
                group_id: Some(unit.id.clone()),
                text: format!("Group {} is coming to you", unit.id),
                fragment: None,
                prompts: Vec::new(),
            },
        );
    }

    fn on_teacher_share(&mut self, who: &PlayerId, group: &UnitId) {
        if !self.st.is_teacher(who) {
            return self.error(
                who,
                codes::NOT_FACILITATOR,
                "only the teacher can complete a teacher share",
            );
        }
        if !matches!(self.st.phase, PhaseId::GroupPuzzle | PhaseId::TeacherShare) {
            return self.illegal(who, "teacher_share_done");
        }
        let Some(i) = self.st.groups.iter().position(|g| &g.unit.id == group) else {
            return self.error(
                who,
                codes::ILLEGAL_IN_PHASE,
                format!("no group \"{group}\""),
            );
        };
        if !self.st.groups[i].unit.puzzle_done() {
            return self.error(
                who,
                codes::ILLEGAL_IN_PHASE,
                format!("group {group} has not finished its puzzle"),
            );
        }
        self.share_with_group(i);
    }

    /// The teacher hands the next unrevealed teacher fragment to group `i`.
    fn share_with_group(&mut self, i: usize) {
        if self.st.groups[i].teacher_visited {
            return;
        }
        self.st.groups[i].teacher_visited = true;
        let frags = &self.s.teacher_fragments;
        let fragment = (!frags.is_empty()).then(|| {
            let f = frags[self.st.teacher.share_cursor % frags.len()].clone();
            self.st.teacher.share_cursor += 1;
            f
        });
        self.st.groups[i].teacher_fragment = fragment.clone();
        let members = self.st.groups[i].unit.members.clone();
        let view = fragment
            .as_ref()
            .and_then(|f| self.s.fragment(f.as_str()))
            .map(|f| FragmentView {
                fragment_id: f.fragment_id.clone(),
                text: f.text.clone(),
            });
        if let Some(f) = &fragment {
            for m in &members {
                let p = self.st.players.get_mut(m).expect("member");
                if !p.heard.contains(f) {
                    p.heard.push(f.clone());
                }
            }
        }
        let group_id = self.st.groups[i].unit.id.clone();
        self.send(
            members,
            TeacherInfo {
                group_id: Some(group_id),
                text: "Your teacher tells you something new".into(),
                fragment: view,
                prompts: Vec::new(),
            },
        );
    }

    fn on_challenge_scan(&mut self, who: &PlayerId, marker: &MarkerId) {
        if self.st.phase != PhaseId::TimedChallenge
            || self.st.challenge.as_ref().is_none_or(|c| c.finished)
        {
            return self.illegal(who, "challenge_scan");
        }
        let c = self.st.challenge.as_mut().expect("checked");
        let Some(count) = c.scanned.get_mut(marker) else {
            return self.error(
                who,
                codes::WRONG_MARKER,
                format!("\"{marker}\" is not a marker"),
            );
        };
        *count += 1;
        if c.scanned.values().all(|&n| n > 0) {
            c.complete = true;
            c.finished = true;
            self.cancel(CHALLENGE_TIMER);
        }
        self.broadcast_challenge();
    }

    fn on_read_done(&mut self, who: &PlayerId, order: usize) {
        if self.st.phase != PhaseId::DiaryCircle {
            return self.illegal(who, "read_done");
        }
        let cursor = self.st.read_cursor;
        if order != cursor || self.st.diary_holder(cursor) != Some(who) {
            return self.error(
                who,
                codes::ILLEGAL_IN_PHASE,
                format!("it is not your turn to read page {order}"),
            );
        }
        self.st.read_cursor += 1;
        self.announce_read_turn();
    }

    fn on_clock(&mut self, ms: u64) {
        if self.st.paused {
            return;
        }
        let end = self.st.virtual_now + ms;
        loop {
            let due = self
                .st
                .armed_timers
                .iter()
                .filter(|(_, &t)| t <= end)
                .min_by_key(|(id, &t)| (t, (*id).clone()))
                .map(|(id, &t)| (id.clone(), t));
            let Some((id, t)) = due else { break };
            self.st.virtual_now = self.st.virtual_now.max(t);
            self.st.armed_timers.remove(&id);
            self.fire(&id);
            self.settle();
            if self.st.paused {
                return;
            }
        }
        self.st.virtual_now = end;
    }

    fn fire(&mut self, timer: &str) {
        if timer == CHALLENGE_TIMER {
            if let Some(c) = self.st.challenge.as_mut() {
                if !c.finished {
                    c.finished = true;
                    self.broadcast_challenge();
                    self.broadcast(PhaseChange {
                        phase: self.st.phase,
                        paused: false,
                        message: "Time is up! Well searched".into(),
                    });
                }
            }
            return;
        }
        let mut parts = timer.splitn(3, '/');
        let (Some("hint"), Some(kind), Some(id)) = (parts.next(), parts.next(), parts.next())
        else {
            return;
        };
        let target = match kind {
            "player" => HintTarget::Player,
            "pair" => HintTarget::Pair,
            "group" => HintTarget::Group,
            _ => return,
        };
        self.deliver_hint(target, id);
    }

    /// Sends the next undelivered hint of the current phase and re-arms the
    /// timer while hints remain. Does nothing once the target is unstuck.
    pub(crate) fn deliver_hint(&mut self, target: HintTarget, id: &str) {
        let phase = self.st.phase;
        let Some(rule) = self.s.hint_policy.for_phase(phase) else {
            return;
        };
        let (level, recipients) = match target {
            HintTarget::Player => {
                let pid = PlayerId::from(id);
                if phase != PhaseId::IndividualDiscovery || plan_complete(self.s, self.st, &pid) {
                    return;
                }
                (self.st.players[&pid].hint_level, vec![pid])
            }
            HintTarget::Pair | HintTarget::Group => {
                let kind = if target == HintTarget::Pair {
                    UnitKind::Pair
                } else {
                    UnitKind::Group
                };
                let list: Vec<&Unit> = match kind {
                    UnitKind::Pair => self.st.pairs.iter().map(|p| &p.unit).collect(),
                    UnitKind::Group => self.st.groups.iter().map(|g| &g.unit).collect(),
                };
                let Some(unit) = list.into_iter().find(|u| u.id.as_str() == id) else {
                    return;
                };
                let stuck = match (kind, phase) {
                    (UnitKind::Pair, PhaseId::PairFormation)
                    | (UnitKind::Group, PhaseId::GroupFormation) => {
                        !formation_done(self.st, unit, kind)
                    }
                    (UnitKind::Pair, PhaseId::PairPuzzle)
                    | (UnitKind::Group, PhaseId::GroupPuzzle) => !unit.solved,
                    _ => false,
                };
                if !stuck {
                    return;
                }
                (unit.hint_level, unit.members.clone())
            }
        };
        let Some(text) = rule.hints.get(level as usize).cloned() else {
            return;
        };
        let level = level + 1;
        match target {
            HintTarget::Player => {}
            HintTarget::Pair | HintTarget::Group => {
                let units: Vec<&mut Unit> = if target == HintTarget::Pair {
                    self.st.pairs.iter_mut().map(|p| &mut p.unit).collect()
                } else {
                    self.st.groups.iter_mut().map(|g| &mut g.unit).collect()
                };
                if let Some(u) = units.into_iter().find(|u| u.id.as_str() == id) {
                    u.hint_level = level;
                }
            }
        }
        for r in &recipients {
            self.st.players.get_mut(r).expect("member").hint_level = level;
        }
        self.send(
            recipients,
            Hint {
                unit_id: id.to_owned(),
                phase,
                level,
                text,
            },
        );
        let timer = hint_timer(target, id);
        self.cancel(&timer);
        if (level as usize) < rule.hints.len() {
            if let Some(d) = self.hint_delay_ms(phase) {
                self.arm(timer, d);
            }
        }
    }
}

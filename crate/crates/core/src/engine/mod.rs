//! The session state machine: a pure function of scenario, state and event.

pub mod assign;
pub mod checkpoint;
pub mod event;
pub mod invariants;
mod machine;
pub mod state;
pub mod view;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ArtifactId, PlayerId};
use crate::phase::PhaseId;
use crate::scenario::{
    matching_pair_entries, validate_scenario, PairCodeEntry, Scenario, MIN_SUPPORTED_PLAYERS,
};

pub use event::{Effect, Event};
pub use machine::has_pending_obligation;
pub use state::{
    ChallengeState, Group, Pair, PlayerState, SessionConfig, SessionState, TeacherState, Unit,
};
pub use view::{current_task, resync_view, PlayerView, UnitView};

/// Whether a unit is a formation pair or a puzzle group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Pair,
    Group,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SessionError {
    #[error("roster of {n} players is outside the supported range {min}..={max}")]
    RosterSize { n: usize, min: usize, max: usize },
    #[error("a session needs a teacher identity")]
    NoTeacher,
    #[error("\"{0}\" appears more than once in the roster")]
    DuplicatePlayer(PlayerId),
    #[error("scenario failed validation: {}", .0.join("; "))]
    ScenarioInvalid(Vec<String>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PairCodeError {
    #[error("no pair-code entry matches the pair's artifacts")]
    NoMatchingEntry,
    #[error("{0} pair-code entries match the pair's artifacts")]
    Ambiguous(usize),
}

/// The unique pair-code entry whose required artifacts are all held by the
/// pair's track-A set `set_a` and track-B set `set_b`.
pub fn derive_pair_code<'s>(
    s: &'s Scenario,
    set_a: &BTreeSet<ArtifactId>,
    set_b: &BTreeSet<ArtifactId>,
) -> Result<&'s PairCodeEntry, PairCodeError> {
    match matching_pair_entries(s, set_a, set_b).as_slice() {
        [] => Err(PairCodeError::NoMatchingEntry),
        [i] => Ok(&s.pair_code_table[*i]),
        many => Err(PairCodeError::Ambiguous(many.len())),
    }
}

/// Builds the initial Lobby state for `roster` plus the teacher.
///
/// Tracks, personas and instruments are fixed here from `seed`; the scenario
/// must validate without errors.
pub fn create_session(
    s: &Scenario,
    session_id: &str,
    roster: &[PlayerId],
    teacher: Option<PlayerId>,
    seed: u64,
    config: SessionConfig,
) -> Result<SessionState, SessionError> {
    let teacher = teacher.ok_or(SessionError::NoTeacher)?;
    let mut seen = BTreeSet::new();
    for p in roster.iter().chain(std::iter::once(&teacher)) {
        if !seen.insert(p) {
            return Err(SessionError::DuplicatePlayer(p.clone()));
        }
    }
    let min = s.min_players.max(MIN_SUPPORTED_PLAYERS);
    if roster.len() < min || roster.len() > s.max_players {
        return Err(SessionError::RosterSize {
            n: roster.len(),
            min,
            max: s.max_players,
        });
    }
    let report = validate_scenario(s);
    if !report.ok {
        return Err(SessionError::ScenarioInvalid(
            report.errors().map(|d| d.to_string()).collect(),
        ));
    }
    let tracks = assign::assign_tracks(roster, seed);
    let personas = assign::assign_personas(roster, seed);
    let instruments = assign::assign_instruments(roster, &s.instruments, seed);
    let players = roster
        .iter()
        .map(|id| {
            let p = PlayerState {
                player_id: id.clone(),
                persona_name: personas[id].clone(),
                track: tracks[id],
                discovered: Vec::new(),
                current_target: None,
                pair_id: None,
                group_id: None,
                pair_token: None,
                token_epoch: 0,
                hint_level: 0,
                instrument: instruments.get(id).cloned().flatten(),
                connected: false,
                idle_since: None,
                join_rank: None,
                notepad_opened: false,
                heard: Vec::new(),
            };
            (id.clone(), p)
        })
        .collect();
    Ok(SessionState {
        session_id: session_id.to_owned(),
        scenario_id: s.scenario_id.clone(),
        scenario_hash: s.content_hash_hex(),
        phase: PhaseId::Lobby,
        paused: false,
        players,
        teacher: TeacherState {
            player_id: teacher,
            persona_name: assign::teacher_persona(seed),
            connected: false,
            join_rank: None,
            share_cursor: 0,
        },
        pairs: Vec::new(),
        groups: Vec::new(),
        event_seq: 0,
        rng_seed: seed,
        virtual_now: 0,
        armed_timers: BTreeMap::new(),
        challenge: None,
        diary_assignment: BTreeMap::new(),
        read_cursor: 0,
        script_cursor: 0,
        line_acks: BTreeSet::new(),
        token_epoch: 0,
        retired_tokens: BTreeMap::new(),
        joins: 0,
        group_arrivals: 0,
        fault: None,
        config,
    })
}

/// Applies `event` in place and returns the effects in emission order.
pub fn apply(s: &Scenario, state: &mut SessionState, event: &Event) -> Vec<Effect> {
    let mut m = machine::Machine::new(s, state);
    m.apply(event);
    m.fx
}

/// Pure form of [`apply`]: the input state is left untouched.
pub fn handle_event(
    s: &Scenario,
    state: &SessionState,
    event: &Event,
) -> (SessionState, Vec<Effect>) {
    let mut next = state.clone();
    let fx = apply(s, &mut next, event);
    (next, fx)
}

/// Fires a hint timer; equivalent to `TimerFired` for that id.
pub fn hint_tick(s: &Scenario, state: &mut SessionState, timer: &str) -> Vec<Effect> {
    apply(
        s,
        state,
        &Event::TimerFired {
            timer: timer.to_owned(),
        },
    )
}

/// Broadcast of a synchronized physical instruction, `lead_ms` from now.
pub fn choreography(state: &SessionState, action: &str, lead_ms: u64) -> Effect {
    Effect::Broadcast {
        msg: crate::protocol::Choreography {
            action: action.to_owned(),
            execute_at: state.virtual_now + lead_ms,
        }
        .into(),
    }
}

/// Handshake edges `(receiver, sender)` of a unit.
pub fn required_edges(
    state: &SessionState,
    unit: &Unit,
    kind: UnitKind,
) -> Vec<(PlayerId, PlayerId)> {
    machine::required_edges(state, unit, kind)
}

/// Whether the current phase's barrier is satisfied.
pub fn phase_complete(s: &Scenario, state: &SessionState) -> bool {
    machine::phase_complete(s, state)
}

/// Hex SHA-256 of the state's JSON form; equal states give equal digests.
pub fn state_digest(state: &SessionState) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(
        serde_json::to_vec(state).expect("session state serializes"),
    ))
}

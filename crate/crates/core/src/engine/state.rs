use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{ArtifactId, FragmentId, MarkerId, PlayerId, UnitId};
use crate::phase::PhaseId;
use crate::scenario::Track;

/// Session-creation overrides. Unset fields fall back to the scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Per-phase hint delay overrides, in seconds.
    #[serde(default)]
    pub hint_delays: BTreeMap<PhaseId, u64>,
    #[serde(default)]
    pub challenge_seconds: Option<u64>,
    /// How far ahead choreography and soundscape cues are scheduled.
    #[serde(default = "default_lead_ms")]
    pub choreography_lead_ms: u64,
    /// Consecutive wrong submissions that trigger the next hint immediately.
    #[serde(default = "default_wrong_attempts")]
    pub wrong_attempts_before_hint: u32,
}

fn default_lead_ms() -> u64 {
    3_000
}

fn default_wrong_attempts() -> u32 {
    3
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            hint_delays: BTreeMap::new(),
            challenge_seconds: None,
            choreography_lead_ms: default_lead_ms(),
            wrong_attempts_before_hint: default_wrong_attempts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerState {
    pub player_id: PlayerId,
    pub persona_name: String,
    pub track: Track,
    /// Ordered set: discovery order, no duplicates.
    pub discovered: Vec<ArtifactId>,
    pub current_target: Option<MarkerId>,
    pub pair_id: Option<UnitId>,
    pub group_id: Option<UnitId>,
    pub pair_token: Option<String>,
    pub token_epoch: u32,
    pub hint_level: u32,
    pub instrument: Option<String>,
    pub connected: bool,
    /// Virtual time since which the player has had no pending obligation.
    pub idle_since: Option<u64>,
    /// Position in first-join order.
    pub join_rank: Option<u64>,
    pub notepad_opened: bool,
    /// Fragments heard from the teacher during the teacher share.
    pub heard: Vec<FragmentId>,
}

impl PlayerState {
    pub fn has_discovered(&self, a: &ArtifactId) -> bool {
        self.discovered.contains(a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherState {
    pub player_id: PlayerId,
    pub persona_name: String,
    pub connected: bool,
    pub join_rank: Option<u64>,
    /// Next teacher fragment to hand out, counted in group-arrival order.
    pub share_cursor: usize,
}

/// Progress of a pair or group through its handshake and puzzle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub id: UnitId,
    pub members: Vec<PlayerId>,
    /// Handshake edges `(receiver, sender)` confirmed so far.
    pub confirmed: BTreeSet<(PlayerId, PlayerId)>,
    pub solved: bool,
    pub submitted_attempts: u32,
    pub wrong_streak: u32,
    pub hint_level: u32,
    /// Expected answer to the unit's puzzle.
    pub code: Option<String>,
    /// Marker the solved unit is sent to next.
    pub unlock_marker: Option<MarkerId>,
    pub unlocked: Option<ArtifactId>,
}

impl Unit {
    pub fn new(id: UnitId, members: Vec<PlayerId>) -> Self {
        Self {
            id,
            members,
            confirmed: BTreeSet::new(),
            solved: false,
            submitted_attempts: 0,
            wrong_streak: 0,
            hint_level: 0,
            code: None,
            unlock_marker: None,
            unlocked: None,
        }
    }

    /// Solved, and the unlock artifact (if any) collected.
    pub fn puzzle_done(&self) -> bool {
        self.solved && (self.unlock_marker.is_none() || self.unlocked.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    #[serde(flatten)]
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    #[serde(flatten)]
    pub unit: Unit,
    pub task_index: usize,
    pub teacher_visited: bool,
    /// Order in which the group became ready to see the teacher.
    pub arrival_rank: Option<u32>,
    pub teacher_fragment: Option<FragmentId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeState {
    pub deadline: u64,
    pub scanned: BTreeMap<MarkerId, u32>,
    pub complete: bool,
    pub finished: bool,
}

/// Authoritative state of one class session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub scenario_id: String,
    /// Hex SHA-256 of the scenario's canonical serialization.
    pub scenario_hash: String,
    pub phase: PhaseId,
    pub paused: bool,
    pub players: BTreeMap<PlayerId, PlayerState>,
    pub teacher: TeacherState,
    pub pairs: Vec<Pair>,
    pub groups: Vec<Group>,
    pub event_seq: u64,
    pub rng_seed: u64,
    pub virtual_now: u64,
    /// timer id → due time.
    pub armed_timers: BTreeMap<String, u64>,
    pub challenge: Option<ChallengeState>,
    pub diary_assignment: BTreeMap<PlayerId, Vec<usize>>,
    pub read_cursor: usize,
    pub script_cursor: usize,
    pub line_acks: BTreeSet<PlayerId>,
    pub token_epoch: u32,
    /// Tokens from earlier epochs, kept to reject stale handshakes.
    pub retired_tokens: BTreeMap<String, u32>,
    pub joins: u64,
    pub group_arrivals: u32,
    /// Set when the engine hit a condition validation should have ruled out.
    pub fault: Option<String>,
    pub config: SessionConfig,
}

impl SessionState {
    pub fn is_teacher(&self, id: &PlayerId) -> bool {
        &self.teacher.player_id == id
    }

    pub fn knows(&self, id: &PlayerId) -> bool {
        self.is_teacher(id) || self.players.contains_key(id)
    }

    pub fn is_connected(&self, id: &PlayerId) -> bool {
        if self.is_teacher(id) {
            self.teacher.connected
        } else {
            self.players.get(id).is_some_and(|p| p.connected)
        }
    }

    pub fn connected_players(&self) -> impl Iterator<Item = &PlayerState> {
        self.players.values().filter(|p| p.connected)
    }

    pub fn pair_of(&self, id: &PlayerId) -> Option<&Pair> {
        let pid = self.players.get(id)?.pair_id.as_ref()?;
        self.pairs.iter().find(|p| &p.unit.id == pid)
    }

    pub fn group_of(&self, id: &PlayerId) -> Option<&Group> {
        let gid = self.players.get(id)?.group_id.as_ref()?;
        self.groups.iter().find(|g| &g.unit.id == gid)
    }

    pub fn group(&self, id: &UnitId) -> Option<&Group> {
        self.groups.iter().find(|g| &g.unit.id == id)
    }

    /// Holder of the diary fragment at `order`.
    pub fn diary_holder(&self, order: usize) -> Option<&PlayerId> {
        self.diary_assignment
            .iter()
            .find(|(_, orders)| orders.contains(&order))
            .map(|(p, _)| p)
    }

    pub fn unit_has_connected(&self, unit: &Unit) -> bool {
        unit.members.iter().any(|m| self.is_connected(m))
    }
}

use serde::{Deserialize, Serialize};

use crate::ids::{MarkerId, PlayerId, UnitId};
use crate::protocol::{Body, FacilitatorCmd};

/// An input to the session state machine. Player-issued variants carry the
/// issuing identity; time arrives only through `ClockAdvance` and `TimerFired`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Join {
        player: PlayerId,
    },
    Leave {
        player: PlayerId,
    },
    Facilitator {
        player: PlayerId,
        cmd: FacilitatorCmd,
    },
    RoleAck {
        player: PlayerId,
        line: usize,
    },
    Scan {
        player: PlayerId,
        marker: MarkerId,
    },
    Proximity {
        player: PlayerId,
        code: String,
    },
    PuzzleSubmit {
        player: PlayerId,
        code: String,
    },
    TeacherShareDone {
        player: PlayerId,
        group: UnitId,
    },
    ChallengeScan {
        player: PlayerId,
        marker: MarkerId,
    },
    ReadDone {
        player: PlayerId,
        order: usize,
    },
    TimerFired {
        timer: String,
    },
    ClockAdvance {
        ms: u64,
    },
}

impl Event {
    pub fn issuer(&self) -> Option<&PlayerId> {
        match self {
            Event::Join { player }
            | Event::Leave { player }
            | Event::Facilitator { player, .. }
            | Event::RoleAck { player, .. }
            | Event::Scan { player, .. }
            | Event::Proximity { player, .. }
            | Event::PuzzleSubmit { player, .. }
            | Event::TeacherShareDone { player, .. }
            | Event::ChallengeScan { player, .. }
            | Event::ReadDone { player, .. } => Some(player),
            Event::TimerFired { .. } | Event::ClockAdvance { .. } => None,
        }
    }

    /// Gameplay events are rejected while the session is paused.
    pub fn is_gameplay(&self) -> bool {
        matches!(
            self,
            Event::RoleAck { .. }
                | Event::Scan { .. }
                | Event::Proximity { .. }
                | Event::PuzzleSubmit { .. }
                | Event::TeacherShareDone { .. }
                | Event::ChallengeScan { .. }
                | Event::ReadDone { .. }
        )
    }

    /// Maps a decoded client message from `player` to an engine event.
    /// `join` and server→client types have no in-session event.
    pub fn from_client(player: &PlayerId, body: &Body) -> Option<Event> {
        let player = player.clone();
        Some(match body {
            Body::RoleAck(m) => Event::RoleAck {
                player,
                line: m.line,
            },
            Body::Scan(m) => Event::Scan {
                player,
                marker: m.marker_id.clone(),
            },
            Body::Proximity(m) => Event::Proximity {
                player,
                code: m.code.clone(),
            },
            Body::PuzzleSubmit(m) => Event::PuzzleSubmit {
                player,
                code: m.code.clone(),
            },
            Body::ChallengeScan(m) => Event::ChallengeScan {
                player,
                marker: m.marker_id.clone(),
            },
            Body::ReadDone(m) => Event::ReadDone {
                player,
                order: m.order,
            },
            Body::FacilitatorCmd(FacilitatorCmd::TeacherShareDone { group_id }) => {
                Event::TeacherShareDone {
                    player,
                    group: group_id.clone(),
                }
            }
            Body::FacilitatorCmd(cmd) => Event::Facilitator {
                player,
                cmd: cmd.clone(),
            },
            _ => return None,
        })
    }
}

/// An output of a transition. Effects are ordered and never feed back into
/// the state that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    SendTo { to: Vec<PlayerId>, msg: Body },
    Broadcast { msg: Body },
    ArmTimer { timer: String, delay_ms: u64 },
    CancelTimer { timer: String },
    WriteCheckpoint,
}

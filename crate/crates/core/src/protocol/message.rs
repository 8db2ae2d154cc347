//! The message catalog: every client→server and server→client payload.

use serde::{Deserialize, Serialize};

use crate::engine::PlayerView;
use crate::ids::{ArtifactId, FragmentId, MarkerId, PlayerId, UnitId};
use crate::phase::PhaseId;

/// Highest envelope version this build understands.
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireMessage {
    pub v: u32,
    pub session: String,
    pub seq: u64,
    #[serde(flatten)]
    pub body: Body,
}

impl WireMessage {
    pub fn new(session: impl Into<String>, seq: u64, body: impl Into<Body>) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            session: session.into(),
            seq,
            body: body.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

/// Facilitator commands carried by `facilitator_cmd`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum FacilitatorCmd {
    Start,
    Pause,
    Resume,
    SkipPhase,
    Restore { checkpoint: String },
    TeacherShareDone { group_id: UnitId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Player,
    Facilitator,
}

/// Which side of the proximity handshake a device plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandshakeRole {
    /// Displays its token.
    Sender,
    /// Enters the partner's token.
    Receiver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Roleplay,
    Notepad,
    Discover,
    PairHandshake,
    PairPuzzle,
    GroupHandshake,
    GroupPuzzle,
    Unlock,
    TeacherVisit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentView {
    pub fragment_id: FragmentId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberView {
    pub player_id: PlayerId,
    pub persona_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiaryLine {
    pub order: usize,
    pub text: String,
}

macro_rules! catalog {
    (
        client { $($cv:ident($cp:ident) = $cname:literal,)* }
        server { $($sv:ident($sp:ident) = $sname:literal,)* }
    ) => {
        /// One catalog entry; serialized as `"type"` plus `"payload"`.
        #[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
        #[serde(tag = "type", content = "payload")]
        #[allow(clippy::large_enum_variant)]
        pub enum Body {
            $(#[serde(rename = $cname)] $cv($cp),)*
            $(#[serde(rename = $sname)] $sv($sp),)*
        }

        impl Body {
            pub fn type_name(&self) -> &'static str {
                match self {
                    $(Body::$cv(_) => $cname,)*
                    $(Body::$sv(_) => $sname,)*
                }
            }

            pub fn direction(&self) -> Direction {
                match self {
                    $(Body::$cv(_) => Direction::ClientToServer,)*
                    $(Body::$sv(_) => Direction::ServerToClient,)*
                }
            }
        }

        $(impl From<$cp> for Body { fn from(p: $cp) -> Self { Body::$cv(p) } })*
        $(impl From<$sp> for Body { fn from(p: $sp) -> Self { Body::$sv(p) } })*

        pub const CLIENT_TYPES: &[&str] = &[$($cname),*];
        pub const SERVER_TYPES: &[&str] = &[$($sname),*];
    };
}

catalog! {
    client {
        Join(Join) = "join",
        RoleAck(RoleAck) = "role_ack",
        Scan(Scan) = "scan",
        Proximity(Proximity) = "proximity",
        PuzzleSubmit(PuzzleSubmit) = "puzzle_submit",
        ChallengeScan(ChallengeScan) = "challenge_scan",
        ReadDone(ReadDone) = "read_done",
        FacilitatorCmd(FacilitatorCmd) = "facilitator_cmd",
    }
    server {
        JoinAck(JoinAck) = "join_ack",
        PhaseChange(PhaseChange) = "phase_change",
        Reveal(Reveal) = "reveal",
        PairAssign(PairAssign) = "pair_assign",
        PuzzleTask(PuzzleTask) = "puzzle_task",
        PuzzleResult(PuzzleResult) = "puzzle_result",
        Hint(Hint) = "hint",
        GroupAssign(GroupAssign) = "group_assign",
        TeacherInfo(TeacherInfo) = "teacher_info",
        ChallengeUpdate(ChallengeUpdate) = "challenge_update",
        DiaryAssign(DiaryAssign) = "diary_assign",
        ReadTurn(ReadTurn) = "read_turn",
        Choreography(Choreography) = "choreography",
        AudioCue(AudioCue) = "audio_cue",
        Resync(Resync) = "resync",
        Error(ErrorMsg) = "error",
    }
}

pub fn is_known_type(t: &str) -> bool {
    CLIENT_TYPES.contains(&t) || SERVER_TYPES.contains(&t)
}

// client → server

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Join {
    pub player_id: PlayerId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleAck {
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scan {
    pub marker_id: MarkerId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proximity {
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleSubmit {
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeScan {
    pub marker_id: MarkerId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadDone {
    pub order: usize,
}

// server → client

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinAck {
    pub player_id: PlayerId,
    pub role: Role,
    pub persona_name: String,
    pub instrument: Option<String>,
    pub phase: PhaseId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseChange {
    pub phase: PhaseId,
    pub paused: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reveal {
    pub artifact_id: ArtifactId,
    pub reveal_text: String,
    pub fragments: Vec<FragmentView>,
    pub next_target: Option<MarkerId>,
    /// Set when the reveal replays discoveries missed while disconnected.
    pub catch_up: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairAssign {
    pub pair_id: UnitId,
    pub partners: Vec<MemberView>,
    pub token: String,
    pub role: HandshakeRole,
    pub epoch: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleTask {
    pub kind: TaskKind,
    pub unit_id: Option<UnitId>,
    pub prompt: String,
    pub target: Option<MarkerId>,
    pub line: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleResult {
    pub unit_id: UnitId,
    pub kind: TaskKind,
    pub correct: bool,
    pub attempts: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hint {
    pub unit_id: String,
    pub phase: PhaseId,
    pub level: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAssign {
    pub group_id: UnitId,
    pub members: Vec<MemberView>,
    pub token: String,
    pub role: HandshakeRole,
    pub epoch: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherInfo {
    pub group_id: Option<UnitId>,
    pub text: String,
    pub fragment: Option<FragmentView>,
    pub prompts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeUpdate {
    pub deadline: u64,
    pub scanned: usize,
    pub total: usize,
    pub complete: bool,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiaryAssign {
    pub fragments: Vec<DiaryLine>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadTurn {
    pub order: usize,
    pub holder: PlayerId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choreography {
    pub action: String,
    pub execute_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioCue {
    pub cue: String,
    pub start_at: u64,
    pub artifact_id: Option<ArtifactId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resync {
    pub view: PlayerView,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorMsg {
    pub code: String,
    pub message: String,
}

impl ErrorMsg {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
        }
    }
}

/// Error codes carried by `error` messages.
pub mod codes {
    pub const ILLEGAL_IN_PHASE: &str = "illegal_in_phase";
    pub const UNKNOWN_IDENTITY: &str = "unknown_identity";
    pub const NOT_FACILITATOR: &str = "not_facilitator";
    pub const WRONG_MARKER: &str = "wrong_marker";
    pub const WRONG_PARTNER: &str = "wrong_partner";
    pub const WRONG_CODE: &str = "wrong_code";
    pub const NO_MATCHING_ENTRY: &str = "no_matching_entry";
    pub const HOST_ONLY: &str = "host_only";
    pub const VERSION: &str = "version";
    pub const FRAME: &str = "frame";
    pub const SCHEMA: &str = "schema";
    pub const UNKNOWN_TYPE: &str = "unknown_type";
    pub const SUPERSEDED: &str = "superseded";
    pub const NO_SUCH_ROOM: &str = "no_such_room";
    pub const NO_SUCH_CHECKPOINT: &str = "no_such_checkpoint";
}

use classplay_core::engine::checkpoint::CheckpointError;
use classplay_core::engine::SessionError;
use classplay_core::ids::PlayerId;
use classplay_core::protocol::codes;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("no room with join code {0:?}")]
    NoSuchRoom(String),
    #[error("{0} is not on this room's roster")]
    UnknownIdentity(PlayerId),
    #[error("this connection was replaced by a newer one for the same identity")]
    Superseded,
    #[error("no checkpoint named {0:?}")]
    NoSuchCheckpoint(String),
    #[error("the server already hosts its limit of {0} rooms")]
    CapacityExceeded(usize),
    #[error("the room clock is driven by the server tick")]
    ClockNotManual,
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("room task stopped")]
    RoomClosed,
}

impl ServerError {
    /// The `error` frame code for failures a client can observe.
    pub fn code(&self) -> &'static str {
        match self {
            ServerError::NoSuchRoom(_) => codes::NO_SUCH_ROOM,
            ServerError::UnknownIdentity(_) => codes::UNKNOWN_IDENTITY,
            ServerError::Superseded => codes::SUPERSEDED,
            ServerError::NoSuchCheckpoint(_) => codes::NO_SUCH_CHECKPOINT,
            ServerError::CapacityExceeded(_) => "capacity_exceeded",
            ServerError::ClockNotManual => "clock_not_manual",
            ServerError::Session(_) | ServerError::Scenario(_) => "scenario_invalid",
            ServerError::Checkpoint(_) => "checkpoint_corrupt",
            ServerError::Config(_) => "config",
            ServerError::Io(_) | ServerError::RoomClosed => "internal",
        }
    }
}

use classplay_core::ids::PlayerId;
use classplay_server::{ClientError, ServerError};
use thiserror::Error;

use crate::profile::ProfileError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad frame from the server: {0}")]
    Frame(String),
    #[error("timed out waiting for {0}")]
    Timeout(String),
    #[error("{0} is not supported by the {1} transport")]
    Unsupported(&'static str, &'static str),
    #[error("{0:?} is not on the roster")]
    UnknownPlayer(PlayerId),
    #[error("gave up after {0} steps")]
    StepLimit(usize),
    #[error("scenario does not validate:\n{0}")]
    InvalidScenario(String),
    #[error("{players} players is outside the supported range {min}..={max}")]
    Size {
        players: usize,
        min: usize,
        max: usize,
    },
}

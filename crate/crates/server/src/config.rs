use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use classplay_core::engine::SessionConfig;
use serde::{Deserialize, Serialize};

use crate::error::ServerError;
use crate::room::DEFAULT_STRIDE;

pub const ENV_LISTEN: &str = "CLASSPLAY_LISTEN";
pub const ENV_CHECKPOINT_DIR: &str = "CLASSPLAY_CHECKPOINT_DIR";

/// Server settings, read from TOML.
///
/// ```toml
/// listen = "0.0.0.0:7878"
/// checkpoint_dir = "checkpoints"
/// checkpoint_stride = 50
/// tick_ms = 100
///
/// [[room]]
/// scenario = "scenarios/sample.json"
/// roster = ["s01", "s02", "s03", "s04", "s05", "s06"]
/// seed = 7
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    /// Where rooms keep their checkpoints. Without one, checkpoints stay in
    /// memory and rooms do not survive a restart.
    pub checkpoint_dir: Option<PathBuf>,
    /// Checkpoint after every this many engine events, besides each phase change.
    pub checkpoint_stride: u64,
    /// Period of the clock tick fed to every room, in milliseconds.
    pub tick_ms: u64,
    /// When set, rooms have no tick; their clock moves only through the
    /// admin `advance` endpoint. Used for reproducible transcripts.
    pub manual_clock: bool,
    pub max_rooms: usize,
    /// Serve the `/rooms` admin endpoints to non-loopback peers too.
    pub admin_remote: bool,
    #[serde(rename = "room")]
    pub rooms: Vec<RoomSpec>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 7878)),
            checkpoint_dir: None,
            checkpoint_stride: DEFAULT_STRIDE,
            tick_ms: 100,
            manual_clock: false,
            max_rooms: 32,
            admin_remote: false,
            rooms: Vec::new(),
        }
    }
}

/// A room opened at startup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub scenario: PathBuf,
    pub roster: Vec<String>,
    #[serde(default = "default_teacher")]
    pub teacher: String,
    pub seed: u64,
    #[serde(default)]
    pub session: SessionConfig,
}

fn default_teacher() -> String {
    "teacher".into()
}

impl ServerConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServerError> {
        let config: Self = toml::from_str(text).map_err(|e| ServerError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file, resolving room scenario paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ServerError> {
        let mut config = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let Some(base) = path.parent() {
            for room in &mut config.rooms {
                if room.scenario.is_relative() {
                    room.scenario = base.join(&room.scenario);
                }
            }
        }
        Ok(config)
    }

    /// Applies `CLASSPLAY_LISTEN` and `CLASSPLAY_CHECKPOINT_DIR` as found by `var`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ServerError> {
        if let Some(listen) = var(ENV_LISTEN) {
            self.listen = listen
                .parse()
                .map_err(|e| ServerError::Config(format!("{ENV_LISTEN}={listen}: {e}")))?;
        }
        if let Some(dir) = var(ENV_CHECKPOINT_DIR) {
            self.checkpoint_dir = Some(dir.into());
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ServerError> {
        if !(10..=1000).contains(&self.tick_ms) {
            return Err(ServerError::Config(format!(
                "tick_ms must be within 10..=1000, got {}",
                self.tick_ms
            )));
        }
        if self.checkpoint_stride == 0 {
            return Err(ServerError::Config(
                "checkpoint_stride must be at least 1".into(),
            ));
        }
        if self.max_rooms == 0 {
            return Err(ServerError::Config("max_rooms must be at least 1".into()));
        }
        Ok(())
    }
}

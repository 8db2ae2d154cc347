//! Room registry and the per-room event loop.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use classplay_core::engine::SessionState;
use classplay_core::ids::PlayerId;
use classplay_core::phase::PhaseId;
use classplay_core::protocol::{encode_line, Body, WireMessage};
use classplay_core::scenario::{load_scenario, validate_scenario, Scenario};
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot, RwLock};

use crate::config::{RoomSpec, ServerConfig};
use crate::error::ServerError;
use crate::room::{join_code, Outbound, RestoreInfo, RoomCore, RoomSetup, SyncInfo};
use crate::store::{write_durable, CheckpointStore, DirStore, MemoryStore};

pub type ConnId = u64;

/// What a connection's writer receives.
#[derive(Debug)]
pub enum ConnOut {
    /// One canonical frame including its LF.
    Frame(String),
    Close,
}

pub type ConnTx = mpsc::UnboundedSender<ConnOut>;

pub(crate) fn frame_text(msg: &WireMessage) -> String {
    let mut line = encode_line(msg);
    line.push('\n');
    line
}

pub(crate) enum RoomInput {
    Join {
        conn: ConnId,
        player: PlayerId,
        tx: ConnTx,
        body: Body,
        bound: oneshot::Sender<Result<(), ServerError>>,
    },
    Frame {
        conn: ConnId,
        player: PlayerId,
        body: Body,
    },
    Reject {
        conn: ConnId,
        player: PlayerId,
        code: &'static str,
        message: String,
    },
    Closed {
        conn: ConnId,
        player: PlayerId,
    },
    Advance {
        ms: u64,
        reply: oneshot::Sender<SyncInfo>,
    },
    Restore {
        query: String,
        reply: oneshot::Sender<Result<RestoreInfo, ServerError>>,
    },
    Sync {
        expect: BTreeMap<PlayerId, u64>,
        reply: oneshot::Sender<SyncInfo>,
    },
    Summary {
        reply: oneshot::Sender<RoomSummary>,
    },
    State {
        reply: oneshot::Sender<SessionState>,
    },
}

/// A room as listed by `classplay rooms`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomSummary {
    pub join_code: String,
    pub scenario_id: String,
    pub phase: PhaseId,
    pub paused: bool,
    pub players: usize,
    pub connected: Vec<PlayerId>,
    pub event_seq: u64,
    pub checkpoints: Vec<String>,
}

/// A request to open a room.
#[derive(Debug, Clone)]
pub struct OpenRoom {
    pub scenario: Scenario,
    pub roster: Vec<PlayerId>,
    pub teacher: PlayerId,
    pub seed: u64,
    pub session: classplay_core::engine::SessionConfig,
}

#[derive(Clone)]
pub(crate) struct RoomHandle {
    tx: mpsc::UnboundedSender<RoomInput>,
}

impl RoomHandle {
    pub(crate) fn send(&self, input: RoomInput) -> Result<(), ServerError> {
        self.tx.send(input).map_err(|_| ServerError::RoomClosed)
    }

    async fn ask<T>(
        &self,
        make: impl FnOnce(oneshot::Sender<T>) -> RoomInput,
    ) -> Result<T, ServerError> {
        let (tx, rx) = oneshot::channel();
        self.send(make(tx))?;
        rx.await.map_err(|_| ServerError::RoomClosed)
    }
}

pub(crate) struct Shared {
    pub(crate) config: ServerConfig,
    rooms: RwLock<BTreeMap<String, RoomHandle>>,
    next_conn: AtomicU64,
}

/// A running classplay server. Cloning shares the same rooms.
#[derive(Clone)]
pub struct Server {
    pub(crate) shared: Arc<Shared>,
}

const ROOM_FILE: &str = "room.json";
const SCENARIO_FILE: &str = "scenario.json";
const CHECKPOINT_SUBDIR: &str = "checkpoints";

impl Server {
    pub fn new(config: ServerConfig) -> Result<Self, ServerError> {
        config.validate()?;
        Ok(Self {
            shared: Arc::new(Shared {
                config,
                rooms: RwLock::new(BTreeMap::new()),
                next_conn: AtomicU64::new(1),
            }),
        })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.shared.config
    }

    pub(crate) fn next_conn_id(&self) -> ConnId {
        self.shared.next_conn.fetch_add(1, Ordering::Relaxed)
    }

    pub(crate) async fn room(&self, code: &str) -> Result<RoomHandle, ServerError> {
        self.shared
            .rooms
            .read()
            .await
            .get(code)
            .cloned()
            .ok_or_else(|| ServerError::NoSuchRoom(code.to_owned()))
    }

    fn room_dir(&self, code: &str) -> Option<PathBuf> {
        self.shared
            .config
            .checkpoint_dir
            .as_ref()
            .map(|d| d.join(code))
    }

    /// Validates the scenario, creates the session and writes checkpoint 0.
    /// Returns the join code.
    pub async fn open_room(&self, req: OpenRoom) -> Result<String, ServerError> {
        let report = validate_scenario(&req.scenario);
        if !report.ok {
            let lines = report.errors().map(|d| d.to_string()).collect();
            return Err(classplay_core::engine::SessionError::ScenarioInvalid(lines).into());
        }
        let mut rooms = self.shared.rooms.write().await;
        if rooms.len() >= self.shared.config.max_rooms {
            return Err(ServerError::CapacityExceeded(self.shared.config.max_rooms));
        }
        let code = (0..)
            .map(|attempt| join_code(req.seed, attempt))
            .find(|c| !rooms.contains_key(c) && self.room_dir(c).is_none_or(|d| !d.exists()))
            .expect("join code space is not exhausted");
        let setup = RoomSetup {
            join_code: code.clone(),
            roster: req.roster,
            teacher: req.teacher,
            seed: req.seed,
            session: req.session,
        };
        let scenario = Arc::new(req.scenario);
        let store: Box<dyn CheckpointStore> = match self.room_dir(&code) {
            Some(dir) => {
                // Validate the roster before anything lands on disk.
                classplay_core::engine::create_session(
                    &scenario,
                    &code,
                    &setup.roster,
                    Some(setup.teacher.clone()),
                    setup.seed,
                    setup.session.clone(),
                )?;
                let store = DirStore::open(dir.join(CHECKPOINT_SUBDIR))?;
                write_durable(&dir.join(SCENARIO_FILE), scenario.to_json().as_bytes())?;
                write_durable(
                    &dir.join(ROOM_FILE),
                    &serde_json::to_vec_pretty(&setup).expect("room setup serializes"),
                )?;
                Box::new(store)
            }
            None => Box::new(MemoryStore::new()),
        };
        let core = RoomCore::open(scenario, setup, store, self.shared.config.checkpoint_stride)?;
        rooms.insert(code.clone(), self.spawn_room(core));
        tracing::info!(room = %code, "room opened");
        Ok(code)
    }

    /// Opens a room described in the config file.
    pub async fn open_spec(&self, spec: &RoomSpec) -> Result<String, ServerError> {
        let bytes = std::fs::read(&spec.scenario)?;
        let scenario = load_scenario(&bytes).map_err(|e| ServerError::Scenario(e.to_string()))?;
        self.open_room(OpenRoom {
            scenario,
            roster: spec
                .roster
                .iter()
                .map(|p| PlayerId::from(p.as_str()))
                .collect(),
            teacher: PlayerId::from(spec.teacher.clone()),
            seed: spec.seed,
            session: spec.session.clone(),
        })
        .await
    }

    /// Reopens every room found in the checkpoint directory at its latest
    /// checkpoint. Returns the recovered join codes.
    pub async fn recover(&self) -> Result<Vec<String>, ServerError> {
        let Some(root) = self.shared.config.checkpoint_dir.clone() else {
            return Ok(Vec::new());
        };
        if !root.exists() {
            return Ok(Vec::new());
        }
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(&root)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(ROOM_FILE).is_file())
            .collect();
        dirs.sort();
        let mut recovered = Vec::new();
        for dir in dirs {
            match self.recover_dir(&dir).await {
                Ok(code) => recovered.push(code),
                Err(e) => tracing::warn!(dir = %dir.display(), "room not recovered: {e}"),
            }
        }
        Ok(recovered)
    }

    async fn recover_dir(&self, dir: &Path) -> Result<String, ServerError> {
        let setup: RoomSetup = serde_json::from_slice(&std::fs::read(dir.join(ROOM_FILE))?)
            .map_err(|e| ServerError::Config(format!("{}: {e}", dir.display())))?;
        let scenario = load_scenario(&std::fs::read(dir.join(SCENARIO_FILE))?)
            .map_err(|e| ServerError::Scenario(e.to_string()))?;
        let store = DirStore::open(dir.join(CHECKPOINT_SUBDIR))?;
        let mut rooms = self.shared.rooms.write().await;
        if rooms.len() >= self.shared.config.max_rooms {
            return Err(ServerError::CapacityExceeded(self.shared.config.max_rooms));
        }
        let code = setup.join_code.clone();
        let core = RoomCore::recover(
            Arc::new(scenario),
            setup,
            Box::new(store),
            self.shared.config.checkpoint_stride,
        )?;
        rooms.insert(code.clone(), self.spawn_room(core));
        tracing::info!(room = %code, "room recovered");
        Ok(code)
    }

    pub async fn rooms(&self) -> Vec<RoomSummary> {
        let handles: Vec<RoomHandle> = self.shared.rooms.read().await.values().cloned().collect();
        let mut out = Vec::new();
        for h in handles {
            if let Ok(s) = h.ask(|reply| RoomInput::Summary { reply }).await {
                out.push(s);
            }
        }
        out
    }

    pub async fn summary(&self, code: &str) -> Result<RoomSummary, ServerError> {
        self.room(code)
            .await?
            .ask(|reply| RoomInput::Summary { reply })
            .await
    }

    pub async fn state(&self, code: &str) -> Result<SessionState, ServerError> {
        self.room(code)
            .await?
            .ask(|reply| RoomInput::State { reply })
            .await
    }

    pub async fn restore(&self, code: &str, checkpoint: &str) -> Result<RestoreInfo, ServerError> {
        let query = checkpoint.to_owned();
        self.room(code)
            .await?
            .ask(|reply| RoomInput::Restore { query, reply })
            .await?
    }

    /// Advances a manual-clock room.
    pub async fn advance(&self, code: &str, ms: u64) -> Result<SyncInfo, ServerError> {
        if !self.shared.config.manual_clock {
            return Err(ServerError::ClockNotManual);
        }
        self.room(code)
            .await?
            .ask(|reply| RoomInput::Advance { ms, reply })
            .await
    }

    /// Answers once the room has accepted at least `expect[id]` inputs from
    /// each listed identity.
    pub async fn sync(
        &self,
        code: &str,
        expect: BTreeMap<PlayerId, u64>,
    ) -> Result<SyncInfo, ServerError> {
        self.room(code)
            .await?
            .ask(|reply| RoomInput::Sync { expect, reply })
            .await
    }

    fn spawn_room(&self, core: RoomCore) -> RoomHandle {
        let (tx, rx) = mpsc::unbounded_channel();
        let tick = (!self.shared.config.manual_clock)
            .then(|| Duration::from_millis(self.shared.config.tick_ms));
        tokio::spawn(run_room(core, rx, tick));
        RoomHandle { tx }
    }
}

struct RoomLoop {
    core: RoomCore,
    conns: BTreeMap<PlayerId, (ConnId, ConnTx)>,
    syncs: Vec<(BTreeMap<PlayerId, u64>, oneshot::Sender<SyncInfo>)>,
}

impl RoomLoop {
    fn deliver(&self, out: Vec<Outbound>) {
        for o in out {
            if let Some((_, tx)) = self.conns.get(&o.to) {
                let _ = tx.send(ConnOut::Frame(frame_text(&o.msg)));
            }
        }
    }

    fn is_current(&self, player: &PlayerId, conn: ConnId) -> bool {
        self.conns.get(player).is_some_and(|(c, _)| *c == conn)
    }

    fn summary(&self) -> RoomSummary {
        let st = self.core.state();
        RoomSummary {
            join_code: self.core.join_code().to_owned(),
            scenario_id: st.scenario_id.clone(),
            phase: st.phase,
            paused: st.paused,
            players: st.players.len(),
            connected: self.conns.keys().cloned().collect(),
            event_seq: st.event_seq,
            checkpoints: self.core.checkpoints().unwrap_or_default(),
        }
    }

    fn handle(&mut self, input: RoomInput) {
        match input {
            RoomInput::Join {
                conn,
                player,
                tx,
                body,
                bound,
            } => {
                if !self.core.knows(&player) {
                    let _ = bound.send(Err(ServerError::UnknownIdentity(player)));
                    return;
                }
                if let Some((old, old_tx)) = self.conns.remove(&player) {
                    if old != conn {
                        let e = ServerError::Superseded;
                        let notice = self.core.error_to(&player, e.code(), e.to_string());
                        let _ = old_tx.send(ConnOut::Frame(frame_text(&notice.msg)));
                        let _ = old_tx.send(ConnOut::Close);
                    }
                }
                self.conns.insert(player.clone(), (conn, tx));
                let _ = bound.send(Ok(()));
                let out = self.core.handle(&player, &body);
                self.deliver(out);
            }
            RoomInput::Frame { conn, player, body } => {
                if self.is_current(&player, conn) {
                    let out = self.core.handle(&player, &body);
                    self.deliver(out);
                }
            }
            RoomInput::Reject {
                conn,
                player,
                code,
                message,
            } => {
                if self.is_current(&player, conn) {
                    let out = self.core.reject(&player, code, message);
                    self.deliver(out);
                }
            }
            RoomInput::Closed { conn, player } => {
                if self.is_current(&player, conn) {
                    self.conns.remove(&player);
                    let out = self.core.disconnect(&player);
                    self.deliver(out);
                }
            }
            RoomInput::Advance { ms, reply } => {
                let out = self.core.advance(ms);
                self.deliver(out);
                let _ = reply.send(self.core.sync_info());
            }
            RoomInput::Restore { query, reply } => match self.core.restore(&query) {
                Ok((info, out)) => {
                    self.deliver(out);
                    tracing::info!(room = %self.core.join_code(), checkpoint = %info.checkpoint, "restored");
                    let _ = reply.send(Ok(info));
                }
                Err(e) => {
                    let _ = reply.send(Err(e));
                }
            },
            RoomInput::Sync { expect, reply } => self.syncs.push((expect, reply)),
            RoomInput::Summary { reply } => {
                let _ = reply.send(self.summary());
            }
            RoomInput::State { reply } => {
                let _ = reply.send(self.core.state().clone());
            }
        }
    }

    fn answer_syncs(&mut self) {
        if self.syncs.is_empty() {
            return;
        }
        let info = self.core.sync_info();
        let (ready, waiting): (Vec<_>, Vec<_>) = std::mem::take(&mut self.syncs)
            .into_iter()
            .partition(|(expect, _)| {
                expect
                    .iter()
                    .all(|(id, n)| info.inputs.get(id).copied().unwrap_or(0) >= *n)
            });
        self.syncs = waiting;
        for (_, reply) in ready {
            let _ = reply.send(info.clone());
        }
    }
}

async fn run_room(
    core: RoomCore,
    mut rx: mpsc::UnboundedReceiver<RoomInput>,
    tick: Option<Duration>,
) {
    let mut room = RoomLoop {
        core,
        conns: BTreeMap::new(),
        syncs: Vec::new(),
    };
    let mut ticker = tick.map(|t| {
        let mut i = tokio::time::interval_at(tokio::time::Instant::now() + t, t);
        i.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        i
    });
    let tick_ms = tick.map_or(0, |t| t.as_millis() as u64);
    loop {
        tokio::select! {
            input = rx.recv() => match input {
                Some(input) => room.handle(input),
                None => break,
            },
            _ = async { ticker.as_mut().expect("guarded").tick().await }, if ticker.is_some() => {
                let out = room.core.advance(tick_ms);
                room.deliver(out);
            }
        }
        room.answer_syncs();
    }
}

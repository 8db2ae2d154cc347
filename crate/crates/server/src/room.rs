//! The transport-free heart of a room: it owns the session, turns client
//! messages into engine events, addresses the resulting frames and writes
//! checkpoints. The async server and the in-process simulator both drive it.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use classplay_core::engine::checkpoint::{decode_checkpoint, encode_checkpoint};
use classplay_core::engine::{
    self, has_pending_obligation, resync_view, Effect, Event, SessionConfig, SessionState,
};
use classplay_core::ids::PlayerId;
use classplay_core::phase::PhaseId;
use classplay_core::protocol::{codes, Body, ErrorMsg, FacilitatorCmd, Resync, WireMessage};
use classplay_core::scenario::Scenario;
use serde::{Deserialize, Serialize};

use crate::error::ServerError;
use crate::store::{checkpoint_name, resolve_name, CheckpointStore};

pub const DEFAULT_STRIDE: u64 = 50;

/// A frame addressed to one identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outbound {
    pub to: PlayerId,
    pub msg: WireMessage,
}

/// Everything a room needs besides the scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoomSetup {
    pub join_code: String,
    pub roster: Vec<PlayerId>,
    pub teacher: PlayerId,
    pub seed: u64,
    #[serde(default)]
    pub session: SessionConfig,
}

/// Progress counters a driver uses to wait for the room to catch up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncInfo {
    pub join_code: String,
    pub event_seq: u64,
    pub phase: PhaseId,
    pub paused: bool,
    pub virtual_now: u64,
    /// Client inputs (frames and disconnects) accepted per identity.
    pub inputs: BTreeMap<PlayerId, u64>,
    /// Last server `seq` sent to each identity.
    pub out_seq: BTreeMap<PlayerId, u64>,
    pub idle_since: BTreeMap<PlayerId, Option<u64>>,
    /// Connected players the current phase is still waiting on.
    pub waiting: Vec<PlayerId>,
    pub attached: Vec<PlayerId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestoreInfo {
    pub checkpoint: String,
    pub event_seq: u64,
    pub phase: PhaseId,
}

pub struct RoomCore {
    setup: RoomSetup,
    scenario: Arc<Scenario>,
    state: SessionState,
    store: Box<dyn CheckpointStore>,
    stride: u64,
    written: usize,
    attached: BTreeSet<PlayerId>,
    out_seq: BTreeMap<PlayerId, u64>,
    inputs: BTreeMap<PlayerId, u64>,
    log: Vec<Event>,
    log_base: u64,
}

impl RoomCore {
    /// Creates the session in Lobby and writes checkpoint 0.
    pub fn open(
        scenario: Arc<Scenario>,
        setup: RoomSetup,
        store: Box<dyn CheckpointStore>,
        stride: u64,
    ) -> Result<Self, ServerError> {
        let state = engine::create_session(
            &scenario,
            &setup.join_code,
            &setup.roster,
            Some(setup.teacher.clone()),
            setup.seed,
            setup.session.clone(),
        )?;
        let written = store.list()?.len();
        let mut core = Self {
            setup,
            scenario,
            state,
            store,
            stride: stride.max(1),
            written,
            attached: BTreeSet::new(),
            out_seq: BTreeMap::new(),
            inputs: BTreeMap::new(),
            log: Vec::new(),
            log_base: 0,
        };
        core.checkpoint()?;
        Ok(core)
    }

    /// Reopens a room from the latest checkpoint in `store`, with nobody
    /// attached. Players who were connected are marked as having left.
    pub fn recover(
        scenario: Arc<Scenario>,
        setup: RoomSetup,
        store: Box<dyn CheckpointStore>,
        stride: u64,
    ) -> Result<Self, ServerError> {
        let names = store.list()?;
        let latest = names
            .last()
            .ok_or_else(|| ServerError::NoSuchCheckpoint("latest".into()))?;
        let bytes = store
            .load(latest)?
            .ok_or_else(|| ServerError::NoSuchCheckpoint(latest.clone()))?;
        let state = decode_checkpoint(&bytes, &scenario)?;
        let log_base = state.event_seq;
        let mut core = Self {
            setup,
            scenario,
            state,
            store,
            stride: stride.max(1),
            written: names.len(),
            attached: BTreeSet::new(),
            out_seq: BTreeMap::new(),
            inputs: BTreeMap::new(),
            log: Vec::new(),
            log_base,
        };
        let _ = core.reconcile_presence();
        Ok(core)
    }

    pub fn join_code(&self) -> &str {
        &self.setup.join_code
    }

    pub fn setup(&self) -> &RoomSetup {
        &self.setup
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    /// Engine events applied since the room was opened, recovered or last
    /// restored. The first one moved the session past [`Self::log_base`].
    pub fn log(&self) -> &[Event] {
        &self.log
    }

    /// The `event_seq` the session had before the first logged event.
    pub fn log_base(&self) -> u64 {
        self.log_base
    }

    pub fn knows(&self, id: &PlayerId) -> bool {
        self.state.knows(id)
    }

    pub fn is_attached(&self, id: &PlayerId) -> bool {
        self.attached.contains(id)
    }

    pub fn checkpoints(&self) -> Result<Vec<String>, ServerError> {
        Ok(self.store.list()?)
    }

    /// Handles one decoded client message from an identity on the roster.
    /// A `join` attaches the identity; it must name the same `player_id`.
    pub fn handle(&mut self, from: &PlayerId, body: &Body) -> Vec<Outbound> {
        self.count_input(from);
        match body {
            Body::Join(_) => {
                self.attached.insert(from.clone());
                self.apply(Event::Join {
                    player: from.clone(),
                })
            }
            Body::FacilitatorCmd(FacilitatorCmd::Restore { checkpoint })
                if self.state.is_teacher(from) =>
            {
                match self.restore(checkpoint) {
                    Ok((_, out)) => out,
                    Err(e) => vec![self.error_to(from, e.code(), e.to_string())],
                }
            }
            other => match Event::from_client(from, other) {
                Some(ev) => self.apply(ev),
                None => vec![self.error_to(
                    from,
                    codes::SCHEMA,
                    format!("{} is a server-to-client message", other.type_name()),
                )],
            },
        }
    }

    /// Records a frame from `from` that could not be decoded.
    pub fn reject(&mut self, from: &PlayerId, code: &str, message: String) -> Vec<Outbound> {
        self.count_input(from);
        vec![self.error_to(from, code, message)]
    }

    /// The identity's connection went away.
    pub fn disconnect(&mut self, who: &PlayerId) -> Vec<Outbound> {
        self.count_input(who);
        if !self.attached.remove(who) {
            return Vec::new();
        }
        self.apply(Event::Leave {
            player: who.clone(),
        })
    }

    /// Advances the session clock, firing due timers.
    pub fn advance(&mut self, ms: u64) -> Vec<Outbound> {
        self.apply(Event::ClockAdvance { ms })
    }

    /// An `error` frame for an attached identity, numbered in its sequence.
    pub fn error_to(&mut self, to: &PlayerId, code: &str, message: impl Into<String>) -> Outbound {
        let seq = self.next_seq(to);
        Outbound {
            to: to.clone(),
            msg: WireMessage::new(
                self.setup.join_code.clone(),
                seq,
                ErrorMsg::new(code, message),
            ),
        }
    }

    /// Loads a checkpoint by name (see [`resolve_name`]) and resyncs every
    /// attached identity.
    pub fn restore(&mut self, query: &str) -> Result<(RestoreInfo, Vec<Outbound>), ServerError> {
        let names = self.store.list()?;
        let name = resolve_name(&names, query)
            .ok_or_else(|| ServerError::NoSuchCheckpoint(query.to_owned()))?
            .clone();
        let bytes = self
            .store
            .load(&name)?
            .ok_or_else(|| ServerError::NoSuchCheckpoint(name.clone()))?;
        self.state = decode_checkpoint(&bytes, &self.scenario)?;
        self.log.clear();
        self.log_base = self.state.event_seq;
        let info = RestoreInfo {
            checkpoint: name,
            event_seq: self.state.event_seq,
            phase: self.state.phase,
        };
        let mut out = self.reconcile_presence();
        let resynced: BTreeSet<PlayerId> = out
            .iter()
            .filter(|o| matches!(o.msg.body, Body::Resync(_)))
            .map(|o| o.to.clone())
            .collect();
        for id in self.attached.clone() {
            if resynced.contains(&id) {
                continue;
            }
            if let Some(view) = resync_view(&self.scenario, &self.state, &id) {
                self.push(&mut out, &id, Resync { view }.into());
            }
        }
        Ok((info, out))
    }

    pub fn sync_info(&self) -> SyncInfo {
        let st = &self.state;
        SyncInfo {
            join_code: self.setup.join_code.clone(),
            event_seq: st.event_seq,
            phase: st.phase,
            paused: st.paused,
            virtual_now: st.virtual_now,
            inputs: self.inputs.clone(),
            out_seq: self.out_seq.clone(),
            idle_since: st
                .players
                .iter()
                .map(|(id, p)| (id.clone(), p.idle_since))
                .collect(),
            waiting: st
                .connected_players()
                .filter(|p| has_pending_obligation(&self.scenario, st, &p.player_id))
                .map(|p| p.player_id.clone())
                .collect(),
            attached: self.attached.iter().cloned().collect(),
        }
    }

    /// Brings the session's notion of who is connected in line with the
    /// identities actually attached.
    fn reconcile_presence(&mut self) -> Vec<Outbound> {
        let mut out = Vec::new();
        let ids: Vec<PlayerId> = std::iter::once(self.state.teacher.player_id.clone())
            .chain(self.state.players.keys().cloned())
            .collect();
        for id in ids {
            let connected = self.state.is_connected(&id);
            let attached = self.attached.contains(&id);
            if connected && !attached {
                out.extend(self.apply(Event::Leave { player: id }));
            } else if attached && !connected {
                out.extend(self.apply(Event::Join { player: id }));
            }
        }
        out
    }

    fn count_input(&mut self, from: &PlayerId) {
        *self.inputs.entry(from.clone()).or_default() += 1;
    }

    fn next_seq(&mut self, to: &PlayerId) -> u64 {
        let seq = self.out_seq.entry(to.clone()).or_default();
        *seq += 1;
        *seq
    }

    fn push(&mut self, out: &mut Vec<Outbound>, to: &PlayerId, body: Body) {
        if !self.attached.contains(to) {
            return;
        }
        let seq = self.next_seq(to);
        out.push(Outbound {
            to: to.clone(),
            msg: WireMessage::new(self.setup.join_code.clone(), seq, body),
        });
    }

    fn apply(&mut self, event: Event) -> Vec<Outbound> {
        let fx = engine::apply(&self.scenario, &mut self.state, &event);
        self.log.push(event);
        let mut out = Vec::new();
        let mut checkpoint = self.state.event_seq.is_multiple_of(self.stride);
        for e in fx {
            match e {
                Effect::SendTo { to, msg } => {
                    for id in &to {
                        self.push(&mut out, id, msg.clone());
                    }
                }
                Effect::Broadcast { msg } => {
                    for id in self.attached.clone() {
                        self.push(&mut out, &id, msg.clone());
                    }
                }
                Effect::WriteCheckpoint => checkpoint = true,
                // Timers live in the session state and fire on ClockAdvance.
                Effect::ArmTimer { .. } | Effect::CancelTimer { .. } => {}
            }
        }
        if checkpoint {
            if let Err(e) = self.checkpoint() {
                tracing::error!(room = %self.setup.join_code, "checkpoint write failed: {e}");
            }
        }
        out
    }

    /// Writes a checkpoint of the current state and returns its name.
    pub fn checkpoint(&mut self) -> Result<String, ServerError> {
        let name = checkpoint_name(self.written, self.state.event_seq, self.state.phase);
        let bytes = encode_checkpoint(&self.state, &self.scenario.content_hash());
        self.store.save(&name, &bytes)?;
        self.written += 1;
        Ok(name)
    }
}

/// Alphabet shared with handshake tokens: no look-alike characters.
pub const JOIN_CODE_ALPHABET: &[u8] = b"ACDEFHJKLMNPRTUVWXY34679";

/// A 6-character join code derived from the room seed; `attempt` picks an
/// alternative when the first one is taken.
pub fn join_code(seed: u64, attempt: u32) -> String {
    use rand::Rng;
    let mut rng = engine::assign::rng_for(seed, "join_code", attempt);
    (0..6)
        .map(|_| JOIN_CODE_ALPHABET[rng.random_range(0..JOIN_CODE_ALPHABET.len())] as char)
        .collect()
}

//! How bot frames reach a room: straight into a [`RoomCore`], or over real
//! TCP sockets to an embedded server running on a manual clock.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use classplay_core::engine::SessionState;
use classplay_core::ids::PlayerId;
use classplay_core::protocol::{decode, encode_line, WireMessage};
use classplay_core::scenario::Scenario;
use classplay_server::admin::OpenRoomRequest;
use classplay_server::{
    AdminClient, MemoryStore, Outbound, RoomCore, RoomSetup, Server, ServerConfig, SyncInfo,
};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader, Lines};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::{TcpListener, TcpStream};
use tokio::runtime::Runtime;

use crate::error::SimError;

const TCP_TIMEOUT: Duration = Duration::from_secs(10);

/// One frame delivered to a client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivered {
    pub to: PlayerId,
    /// The frame as sent, without its terminating LF.
    pub frame: String,
    pub msg: WireMessage,
}

/// The outcome of one input: what clients received, and the room's counters.
#[derive(Debug, Clone)]
pub struct Step {
    pub out: Vec<Delivered>,
    pub info: SyncInfo,
}

pub trait Transport {
    fn name(&self) -> &'static str;
    /// Sends one LF-terminated frame on `who`'s connection, opening it first
    /// if needed.
    fn send(&mut self, who: &PlayerId, frame: &[u8]) -> Result<Step, SimError>;
    /// Closes `who`'s connection.
    fn disconnect(&mut self, who: &PlayerId) -> Result<Step, SimError>;
    fn advance(&mut self, ms: u64) -> Result<Step, SimError>;
    fn state(&mut self) -> Result<Cow<'_, SessionState>, SimError>;
    /// Kills the room and restarts it from its latest checkpoint with every
    /// connection gone.
    fn crash(&mut self) -> Result<Step, SimError>;
}

fn sorted(mut out: Vec<Delivered>) -> Vec<Delivered> {
    out.sort_by(|a, b| (&a.to, a.msg.seq).cmp(&(&b.to, b.msg.seq)));
    out
}

fn delivered(out: Vec<Outbound>) -> Vec<Delivered> {
    sorted(
        out.into_iter()
            .map(|o| Delivered {
                frame: encode_line(&o.msg),
                to: o.to,
                msg: o.msg,
            })
            .collect(),
    )
}

/// Frames from a connection are accepted only with a rising `seq`, as the
/// network layer does.
#[derive(Debug, Default)]
struct SeqFilter {
    last: BTreeMap<PlayerId, u64>,
}

impl SeqFilter {
    fn accepts(&mut self, who: &PlayerId, msg: &WireMessage) -> bool {
        let last = self.last.entry(who.clone()).or_default();
        if msg.seq != 0 && msg.seq <= *last {
            return false;
        }
        *last = msg.seq;
        true
    }

    fn reset(&mut self, who: &PlayerId) {
        self.last.remove(who);
    }
}

/// Drives a [`RoomCore`] directly; frames still go through the codec.
pub struct InProcess {
    core: RoomCore,
    store: MemoryStore,
    stride: u64,
    seqs: SeqFilter,
    connected: BTreeSet<PlayerId>,
}

impl InProcess {
    pub fn open(scenario: Arc<Scenario>, setup: RoomSetup, stride: u64) -> Result<Self, SimError> {
        let store = MemoryStore::new();
        let core = RoomCore::open(scenario, setup, Box::new(store.clone()), stride)?;
        Ok(Self {
            core,
            store,
            stride,
            seqs: SeqFilter::default(),
            connected: BTreeSet::new(),
        })
    }

    pub fn core(&self) -> &RoomCore {
        &self.core
    }

    pub fn store(&self) -> &MemoryStore {
        &self.store
    }

    fn step(&self, out: Vec<Outbound>) -> Step {
        Step {
            out: delivered(out),
            info: self.core.sync_info(),
        }
    }
}

impl Transport for InProcess {
    fn name(&self) -> &'static str {
        "in-process"
    }

    fn send(&mut self, who: &PlayerId, frame: &[u8]) -> Result<Step, SimError> {
        if self.connected.insert(who.clone()) {
            self.seqs.reset(who);
        }
        let out = match decode(frame) {
            Ok(msg) if self.seqs.accepts(who, &msg) => self.core.handle(who, &msg.body),
            Ok(_) => Vec::new(),
            Err(e) => self.core.reject(who, e.code(), e.to_string()),
        };
        Ok(self.step(out))
    }

    fn disconnect(&mut self, who: &PlayerId) -> Result<Step, SimError> {
        self.connected.remove(who);
        let out = self.core.disconnect(who);
        Ok(self.step(out))
    }

    fn advance(&mut self, ms: u64) -> Result<Step, SimError> {
        let out = self.core.advance(ms);
        Ok(self.step(out))
    }

    fn state(&mut self) -> Result<Cow<'_, SessionState>, SimError> {
        Ok(Cow::Borrowed(self.core.state()))
    }

    fn crash(&mut self) -> Result<Step, SimError> {
        let scenario = self.core.scenario().clone();
        let setup = self.core.setup().clone();
        self.core = RoomCore::recover(scenario, setup, Box::new(self.store.clone()), self.stride)?;
        self.connected.clear();
        self.seqs = SeqFilter::default();
        Ok(self.step(Vec::new()))
    }
}

struct TcpConn {
    write: OwnedWriteHalf,
    lines: Lines<BufReader<OwnedReadHalf>>,
    seen: u64,
}

/// Real sockets against an embedded server with a manual clock. Admin calls
/// (open, advance, sync, state) go over HTTP on the same port.
pub struct Tcp {
    rt: Runtime,
    addr: SocketAddr,
    admin: AdminClient,
    code: String,
    conns: BTreeMap<PlayerId, TcpConn>,
    seqs: SeqFilter,
    expect: BTreeMap<PlayerId, u64>,
    last: Option<SyncInfo>,
}

impl Tcp {
    pub fn open(scenario: &Scenario, setup: RoomSetup, stride: u64) -> Result<Self, SimError> {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let config = ServerConfig {
            listen: "127.0.0.1:0".parse().expect("literal address"),
            manual_clock: true,
            checkpoint_stride: stride,
            ..ServerConfig::default()
        };
        let server = Server::new(config)?;
        let listener = rt.block_on(TcpListener::bind("127.0.0.1:0"))?;
        let addr = listener.local_addr()?;
        rt.spawn(server.serve(listener));
        let admin = AdminClient::new(&addr.to_string());
        let req = OpenRoomRequest {
            scenario: serde_json::to_value(scenario.doc()).expect("scenario serializes"),
            roster: setup.roster.clone(),
            teacher: setup.teacher.clone(),
            seed: setup.seed,
            session: setup.session.clone(),
        };
        let code = rt.block_on(admin.open_room(&req))?;
        Ok(Self {
            rt,
            addr,
            admin,
            code,
            conns: BTreeMap::new(),
            seqs: SeqFilter::default(),
            expect: BTreeMap::new(),
            last: None,
        })
    }

    pub fn join_code(&self) -> &str {
        &self.code
    }

    fn count(&mut self, who: &PlayerId) {
        *self.expect.entry(who.clone()).or_default() += 1;
    }

    /// Waits until the room has taken every input, then reads each open
    /// connection up to the last seq the room sent it.
    fn settle(&mut self, info: Option<SyncInfo>) -> Result<Step, SimError> {
        let info = match info {
            Some(i) => i,
            None => {
                let fut = self.admin.sync(&self.code, self.expect.clone());
                self.rt
                    .block_on(async { tokio::time::timeout(TCP_TIMEOUT, fut).await })
                    .map_err(|_| SimError::Timeout("room sync".into()))??
            }
        };
        let mut out = Vec::new();
        for (who, conn) in self.conns.iter_mut() {
            let target = info.out_seq.get(who).copied().unwrap_or(0);
            while conn.seen < target {
                let line = self
                    .rt
                    .block_on(async {
                        tokio::time::timeout(TCP_TIMEOUT, conn.lines.next_line()).await
                    })
                    .map_err(|_| SimError::Timeout(format!("frames for {who}")))??
                    .ok_or_else(|| SimError::Frame(format!("connection of {who} closed")))?;
                let msg = decode(format!("{line}\n").as_bytes())
                    .map_err(|e| SimError::Frame(e.to_string()))?;
                conn.seen = conn.seen.max(msg.seq);
                out.push(Delivered {
                    to: who.clone(),
                    frame: line,
                    msg,
                });
            }
        }
        self.last = Some(info.clone());
        Ok(Step {
            out: sorted(out),
            info,
        })
    }
}

impl Transport for Tcp {
    fn name(&self) -> &'static str {
        "tcp"
    }

    fn send(&mut self, who: &PlayerId, frame: &[u8]) -> Result<Step, SimError> {
        if !self.conns.contains_key(who) {
            let stream = self.rt.block_on(TcpStream::connect(self.addr))?;
            stream.set_nodelay(true)?;
            let (read, write) = stream.into_split();
            let seen = self
                .last
                .as_ref()
                .and_then(|i| i.out_seq.get(who).copied())
                .unwrap_or(0);
            self.conns.insert(
                who.clone(),
                TcpConn {
                    write,
                    lines: BufReader::new(read).lines(),
                    seen,
                },
            );
            self.seqs.reset(who);
        }
        match decode(frame) {
            Ok(msg) if !self.seqs.accepts(who, &msg) => {}
            _ => self.count(who),
        }
        let conn = self.conns.get_mut(who).expect("opened above");
        self.rt.block_on(conn.write.write_all(frame))?;
        self.settle(None)
    }

    fn disconnect(&mut self, who: &PlayerId) -> Result<Step, SimError> {
        if let Some(mut conn) = self.conns.remove(who) {
            self.rt.block_on(conn.write.shutdown())?;
            drop(conn);
            self.count(who);
        }
        self.settle(None)
    }

    fn advance(&mut self, ms: u64) -> Result<Step, SimError> {
        let info = self.rt.block_on(self.admin.advance(&self.code, ms))?;
        self.settle(Some(info))
    }

    fn state(&mut self) -> Result<Cow<'_, SessionState>, SimError> {
        Ok(Cow::Owned(self.rt.block_on(self.admin.state(&self.code))?))
    }

    fn crash(&mut self) -> Result<Step, SimError> {
        Err(SimError::Unsupported("crash", "tcp"))
    }
}

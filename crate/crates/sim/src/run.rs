//! The simulation loop: bots act on a virtual clock against one room.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use classplay_core::engine::invariants::{
    check_diary_order, check_effects_no_leak, check_state, check_view_no_leak,
};
use classplay_core::engine::{state_digest, Effect, PlayerView, SessionConfig, SessionState};
use classplay_core::ids::PlayerId;
use classplay_core::phase::PhaseId;
use classplay_core::protocol::{encode, Body, WireMessage};
use classplay_core::scenario::Scenario;
use classplay_server::{join_code, RoomSetup, DEFAULT_STRIDE};
use serde::{Deserialize, Serialize};

use crate::bot::{Bot, Class, Intent};
use crate::error::SimError;
use crate::profile::{BotProfile, Fault, ProfileSpec, Target};
use crate::transcript::{idle_metric, Dir, IdleReport, IdleTracker, PhaseSpan, Transcript};
use crate::transport::{InProcess, Step, Tcp, Transport};

pub const TEACHER: &str = "teacher";
/// Virtual time without any bot action after which a stalled room counts as
/// deadlocked.
pub const DEADLOCK_MS: u64 = 15 * 60 * 1000;
/// Hard stop on virtual time.
pub const MAX_VIRTUAL_MS: u64 = 6 * 60 * 60 * 1000;
const MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    #[default]
    InProcess,
    Tcp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub players: usize,
    pub seed: u64,
    #[serde(default)]
    pub profiles: Vec<ProfileSpec>,
    #[serde(default)]
    pub faults: Vec<Fault>,
    #[serde(default)]
    pub session: SessionConfig,
    pub stride: u64,
    #[serde(default)]
    pub transport: TransportKind,
    /// Check state invariants after every step rather than only at the end.
    pub check_every_step: bool,
    pub deadlock_ms: u64,
    pub max_virtual_ms: u64,
}

impl SimConfig {
    pub fn new(players: usize, seed: u64) -> Self {
        Self {
            players,
            seed,
            profiles: Vec::new(),
            faults: Vec::new(),
            session: SessionConfig::default(),
            stride: DEFAULT_STRIDE,
            transport: TransportKind::InProcess,
            check_every_step: true,
            deadlock_ms: DEADLOCK_MS,
            max_virtual_ms: MAX_VIRTUAL_MS,
        }
    }

    /// The profile for `id`: its own assignment, else the last `*` one.
    pub fn profile_for(&self, id: &PlayerId) -> BotProfile {
        let own = self
            .profiles
            .iter()
            .rev()
            .find(|p| p.target == Target::Player(id.clone()));
        let all = self.profiles.iter().rev().find(|p| p.target == Target::All);
        own.or(all).map(|p| p.profile.clone()).unwrap_or_default()
    }
}

/// Invariant violations visible after one step.
fn check_step(
    s: &Scenario,
    st: &SessionState,
    effects: &[Effect],
    views: &[PlayerView],
) -> Vec<String> {
    check_state(s, st)
        .into_iter()
        .chain(check_effects_no_leak(st, effects))
        .chain(views.iter().flat_map(|v| check_view_no_leak(st, v)))
        .map(|v| v.to_string())
        .collect()
}

/// Student identities `s01`, `s02`, ...
pub fn roster(n: usize) -> Vec<PlayerId> {
    let width = n.to_string().len().max(2);
    (1..=n)
        .map(|i| PlayerId::new(format!("s{i:0width$}")))
        .collect()
}

pub fn room_setup(config: &SimConfig) -> RoomSetup {
    RoomSetup {
        join_code: join_code(config.seed, 0),
        roster: roster(config.players),
        teacher: PlayerId::from(TEACHER),
        seed: config.seed,
        session: config.session.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deadlock {
    pub phase: PhaseId,
    pub waiting: Vec<PlayerId>,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropRecord {
    pub player: PlayerId,
    pub phase: PhaseId,
    pub at: u64,
    pub rejoined_at: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub players: usize,
    pub seed: u64,
    pub transport: String,
    pub completed: bool,
    pub final_phase: PhaseId,
    pub virtual_ms: u64,
    pub steps: usize,
    pub frames_in: usize,
    pub frames_out: usize,
    pub phases: Vec<PhaseSpan>,
    pub violations: Vec<String>,
    /// Engine-recorded faults such as a pair with no matching code entry.
    pub engine_fault: Option<String>,
    pub error_codes: BTreeMap<String, u64>,
    pub drops: Vec<DropRecord>,
    pub crashes: Vec<PhaseId>,
    pub deadlock: Option<Deadlock>,
    pub idle: IdleReport,
    pub transcript_digest: String,
    pub state_digest: String,
}

impl RunReport {
    /// Finished, no invariant violations, no engine faults.
    pub fn ok(&self) -> bool {
        self.completed && self.violations.is_empty() && self.engine_fault.is_none()
    }
}

struct Sim<'a> {
    scenario: &'a Scenario,
    config: &'a SimConfig,
    transport: &'a mut dyn Transport,
    session: String,
    bots: BTreeMap<PlayerId, Bot>,
    due: BTreeMap<PlayerId, u64>,
    now: u64,
    phase: PhaseId,
    transcript: Transcript,
    idle: IdleTracker,
    phases: Vec<PhaseSpan>,
    violations: BTreeSet<String>,
    error_codes: BTreeMap<String, u64>,
    drops: Vec<DropRecord>,
    crash_at: BTreeSet<PhaseId>,
    crashes: Vec<PhaseId>,
    reads: Vec<usize>,
    read_cursor: usize,
    last_action: u64,
    steps: usize,
    waiting: Vec<PlayerId>,
}

/// Runs one session to the end (or to a deadlock) and returns its transcript.
pub fn run_simulation(
    scenario: &Scenario,
    config: &SimConfig,
) -> Result<(Transcript, RunReport), SimError> {
    let setup = room_setup(config);
    let (mut transport, session): (Box<dyn Transport>, String) = match config.transport {
        TransportKind::InProcess => {
            let t = InProcess::open(Arc::new(scenario.clone()), setup.clone(), config.stride)?;
            (Box::new(t), setup.join_code.clone())
        }
        TransportKind::Tcp => {
            let t = Tcp::open(scenario, setup.clone(), config.stride)?;
            let code = t.join_code().to_owned();
            (Box::new(t), code)
        }
    };
    run_on(scenario, config, transport.as_mut(), &session)
}

/// Runs a session over a transport the caller keeps, so the room can be
/// inspected afterwards. `session` is the room's join code.
pub fn run_on(
    scenario: &Scenario,
    config: &SimConfig,
    transport: &mut dyn Transport,
    session: &str,
) -> Result<(Transcript, RunReport), SimError> {
    for p in &config.profiles {
        p.profile.validate()?;
    }
    let setup = room_setup(config);
    Sim::new(scenario, config, transport, session.to_owned(), &setup).run()
}

impl<'a> Sim<'a> {
    fn new(
        scenario: &'a Scenario,
        config: &'a SimConfig,
        transport: &'a mut dyn Transport,
        session: String,
        setup: &RoomSetup,
    ) -> Self {
        let mut bots = BTreeMap::new();
        for (rank, id) in setup.roster.iter().enumerate() {
            bots.insert(
                id.clone(),
                Bot::new(id.clone(), false, rank, config.profile_for(id), config.seed),
            );
        }
        let teacher = setup.teacher.clone();
        bots.insert(
            teacher.clone(),
            Bot::new(
                teacher.clone(),
                true,
                setup.roster.len(),
                config.profile_for(&teacher),
                config.seed,
            ),
        );
        let mut crash_at = BTreeSet::new();
        for f in &config.faults {
            match f {
                Fault::Drop {
                    player,
                    phase,
                    rejoin_ms,
                } => {
                    if let Some(b) = bots.get_mut(player) {
                        b.drop_at = Some((*phase, *rejoin_ms));
                    }
                }
                Fault::Crash { phase } => {
                    crash_at.insert(*phase);
                }
                Fault::Duplicate { player } => {
                    if let Some(b) = bots.get_mut(player) {
                        b.duplicate = true;
                    }
                }
            }
        }
        for b in bots.values_mut() {
            b.rejoin_at = Some(0);
        }
        Self {
            scenario,
            config,
            transport,
            session,
            bots,
            due: BTreeMap::new(),
            now: 0,
            phase: PhaseId::Lobby,
            transcript: Transcript::default(),
            idle: IdleTracker::default(),
            phases: vec![PhaseSpan {
                phase: PhaseId::Lobby,
                start: 0,
                end: 0,
            }],
            violations: BTreeSet::new(),
            error_codes: BTreeMap::new(),
            drops: Vec::new(),
            crash_at,
            crashes: Vec::new(),
            reads: Vec::new(),
            read_cursor: 0,
            last_action: 0,
            steps: 0,
            waiting: Vec::new(),
        }
    }

    fn check_faults(&self) -> Result<(), SimError> {
        let unknown = self.config.faults.iter().find_map(|f| match f {
            Fault::Drop { player, .. } | Fault::Duplicate { player }
                if !self.bots.contains_key(player) =>
            {
                Some(player.clone())
            }
            _ => None,
        });
        let unknown = unknown.or_else(|| {
            self.config.profiles.iter().find_map(|p| match &p.target {
                Target::Player(id) if !self.bots.contains_key(id) => Some(id.clone()),
                _ => None,
            })
        });
        match unknown {
            Some(id) => Err(SimError::UnknownPlayer(id)),
            None => Ok(()),
        }
    }

    fn run(&mut self) -> Result<(Transcript, RunReport), SimError> {
        self.check_faults()?;
        let mut deadlock = None;
        while self.phase != PhaseId::Ended {
            self.steps += 1;
            if self.steps > MAX_STEPS {
                return Err(SimError::StepLimit(MAX_STEPS));
            }
            if self.now > self.config.max_virtual_ms {
                deadlock = Some(self.deadlock());
                break;
            }
            self.plan();
            let next = self.due.iter().map(|(id, t)| (*t, id.clone())).min();
            match next {
                Some((t, _)) if t > self.now => {
                    let step = self.transport.advance(t - self.now)?;
                    self.absorb(step)?;
                }
                Some((_, id)) => {
                    self.due.remove(&id);
                    self.act(&id)?;
                }
                None => match self.wake_time()? {
                    Some(t) if t.saturating_sub(self.last_action) <= self.config.deadlock_ms => {
                        let step = self.transport.advance(t.saturating_sub(self.now).max(1))?;
                        self.absorb(step)?;
                    }
                    _ => {
                        deadlock = Some(self.deadlock());
                        break;
                    }
                },
            }
        }
        self.finish(deadlock)
    }

    fn deadlock(&self) -> Deadlock {
        Deadlock {
            phase: self.phase,
            waiting: self.waiting.clone(),
            at: self.now,
        }
    }

    /// Schedules every bot that wants to do something and is not scheduled.
    fn plan(&mut self) {
        let class = Class {
            scenario: self.scenario,
            bots: &self.bots,
        };
        let wanting: Vec<(PlayerId, Intent)> = self
            .bots
            .iter()
            .filter(|(id, _)| !self.due.contains_key(*id))
            .filter_map(|(id, b)| b.intent(&class, self.now).map(|i| (id.clone(), i)))
            .collect();
        for (id, intent) in wanting {
            let bot = self.bots.get_mut(&id).expect("bot exists");
            let t = match intent {
                Intent::Join => self.now,
                _ => self.now + bot.latency(),
            };
            self.due.insert(id, t);
        }
    }

    /// The next time something happens without a bot acting: a timer or a
    /// planned rejoin.
    fn wake_time(&mut self) -> Result<Option<u64>, SimError> {
        let st = self.transport.state()?;
        let timer = st
            .armed_timers
            .values()
            .copied()
            .filter(|&t| t > self.now)
            .min();
        let rejoin = self
            .bots
            .values()
            .filter(|b| !b.connected)
            .filter_map(|b| b.rejoin_at)
            .min();
        Ok(match (timer, rejoin) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        })
    }

    fn act(&mut self, id: &PlayerId) -> Result<(), SimError> {
        let class = Class {
            scenario: self.scenario,
            bots: &self.bots,
        };
        let Some(intent) = self.bots[id].intent(&class, self.now) else {
            return Ok(());
        };
        self.last_action = self.now;
        match intent {
            Intent::Join => {
                let bot = self.bots.get_mut(id).expect("bot exists");
                bot.connected = true;
                bot.seq = 0;
                bot.rejoin_at = None;
                let body = bot.join_body();
                if let Some(d) = self.drops.iter_mut().rev().find(|d| &d.player == id) {
                    d.rejoined_at.get_or_insert(self.now);
                }
                self.send(id, body)
            }
            Intent::Disconnect => {
                let bot = self.bots.get_mut(id).expect("bot exists");
                bot.went_away(self.now, false);
                self.drops.push(DropRecord {
                    player: id.clone(),
                    phase: self.phase,
                    at: self.now,
                    rejoined_at: None,
                });
                self.transcript.push(self.now, Dir::Close, id, "");
                let step = self.transport.disconnect(id)?;
                self.absorb(step)
            }
            Intent::Send(action) => {
                let body = self.bots.get_mut(id).expect("bot exists").commit(&action);
                self.send(id, body)
            }
        }
    }

    fn send(&mut self, id: &PlayerId, body: Body) -> Result<(), SimError> {
        let bot = self.bots.get_mut(id).expect("bot exists");
        let msg = WireMessage::new(self.session.clone(), bot.next_seq(), body);
        let frame = encode(&msg);
        let copies = if bot.duplicate { 2 } else { 1 };
        for _ in 0..copies {
            let line = std::str::from_utf8(&frame[..frame.len() - 1]).expect("frames are UTF-8");
            self.transcript.push(self.now, Dir::In, id, line);
            let step = self.transport.send(id, &frame)?;
            self.absorb(step)?;
        }
        Ok(())
    }

    fn absorb(&mut self, step: Step) -> Result<(), SimError> {
        let info = step.info;
        self.now = info.virtual_now;
        let mut effects = Vec::new();
        let mut views = Vec::new();
        for d in step.out {
            self.transcript.push(self.now, Dir::Out, &d.to, d.frame);
            if let Body::Error(e) = &d.msg.body {
                *self.error_codes.entry(e.code.clone()).or_default() += 1;
            }
            if let Body::Resync(r) = &d.msg.body {
                views.push(r.view.clone());
            }
            if let Some(bot) = self.bots.get_mut(&d.to) {
                bot.receive(&d.msg.body);
            }
            effects.push(Effect::SendTo {
                to: vec![d.to],
                msg: d.msg.body,
            });
        }
        if info.phase != self.phase {
            if let Some(last) = self.phases.last_mut() {
                last.end = self.now;
            }
            self.phases.push(PhaseSpan {
                phase: info.phase,
                start: self.now,
                end: self.now,
            });
            self.phase = info.phase;
        }
        self.waiting = info.waiting.clone();
        let bots = &self.bots;
        self.idle.observe(
            &mut self.transcript,
            self.now,
            info.phase,
            &info.idle_since,
            |p| bots.get(p).is_some_and(|b| b.connected),
        );
        if self.config.check_every_step {
            let st = self.transport.state()?;
            self.violations
                .extend(check_step(self.scenario, &st, &effects, &views));
            if st.read_cursor > self.read_cursor {
                self.reads.extend(self.read_cursor..st.read_cursor);
                self.read_cursor = st.read_cursor;
            }
        }
        if self.crash_at.remove(&self.phase) {
            self.crash()?;
        }
        Ok(())
    }

    fn crash(&mut self) -> Result<(), SimError> {
        self.crashes.push(self.phase);
        self.transcript
            .push(self.now, Dir::Crash, &PlayerId::from(TEACHER), "");
        let step = self.transport.crash()?;
        self.due.clear();
        for bot in self.bots.values_mut() {
            bot.went_away(self.now, true);
            let back = self.now + bot.latency();
            bot.rejoin_at = Some(back);
        }
        self.absorb(step)
    }

    fn finish(&mut self, deadlock: Option<Deadlock>) -> Result<(Transcript, RunReport), SimError> {
        if let Some(last) = self.phases.last_mut() {
            last.end = self.now;
        }
        self.idle.close_all(&mut self.transcript, self.now);
        let st = self.transport.state()?.into_owned();
        self.violations
            .extend(check_step(self.scenario, &st, &[], &[]));
        if deadlock.is_none() && self.config.check_every_step {
            for v in check_diary_order(self.scenario, &self.reads) {
                self.violations.insert(v.to_string());
            }
        }
        self.transcript.final_state = state_digest(&st);
        let frames_in = self
            .transcript
            .entries
            .iter()
            .filter(|e| e.dir == Dir::In)
            .count();
        let frames_out = self
            .transcript
            .entries
            .iter()
            .filter(|e| e.dir == Dir::Out)
            .count();
        let report = RunReport {
            players: self.config.players,
            seed: self.config.seed,
            transport: self.transport.name().into(),
            completed: st.phase == PhaseId::Ended,
            final_phase: st.phase,
            virtual_ms: self.now,
            steps: self.steps,
            frames_in,
            frames_out,
            phases: self.phases.clone(),
            violations: self.violations.iter().cloned().collect(),
            engine_fault: st.fault.clone(),
            error_codes: self.error_codes.clone(),
            drops: self.drops.clone(),
            crashes: self.crashes.clone(),
            deadlock,
            idle: idle_metric(&self.transcript),
            transcript_digest: self.transcript.digest(),
            state_digest: self.transcript.final_state.clone(),
        };
        Ok((std::mem::take(&mut self.transcript), report))
    }
}

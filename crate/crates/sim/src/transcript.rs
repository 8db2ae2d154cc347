//! Run records: every frame with its virtual timestamp, plus idle spans.

use std::collections::BTreeMap;

use classplay_core::ids::PlayerId;
use classplay_core::phase::PhaseId;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dir {
    /// A frame a client sent.
    In,
    /// A frame a client received.
    Out,
    /// The client's connection closed.
    Close,
    /// The room process died and restarted.
    Crash,
}

impl Dir {
    fn as_str(self) -> &'static str {
        match self {
            Dir::In => "in",
            Dir::Out => "out",
            Dir::Close => "close",
            Dir::Crash => "crash",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    /// Virtual milliseconds since the room opened.
    pub t: u64,
    pub dir: Dir,
    pub who: PlayerId,
    /// The frame without its LF; empty for `close` and `crash`.
    pub frame: String,
}

/// A stretch of time in which a connected player owed nothing to the phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdleSpan {
    pub phase: PhaseId,
    pub start: u64,
    pub end: u64,
}

impl IdleSpan {
    pub fn len(&self) -> u64 {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpan {
    pub phase: PhaseId,
    pub start: u64,
    pub end: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub entries: Vec<Entry>,
    /// Digest of the final session state.
    pub final_state: String,
    pub idle: BTreeMap<PlayerId, Vec<IdleSpan>>,
}

impl Transcript {
    pub fn push(&mut self, t: u64, dir: Dir, who: &PlayerId, frame: impl Into<String>) {
        self.entries.push(Entry {
            t,
            dir,
            who: who.clone(),
            frame: frame.into(),
        });
    }

    /// Hex SHA-256 over the entries and the final state digest. Two runs
    /// with equal digests saw the same frames at the same times.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(format!("{} {} {} ", e.t, e.dir.as_str(), e.who));
            h.update(e.frame.as_bytes());
            h.update(b"\n");
        }
        h.update(self.final_state.as_bytes());
        hex::encode(h.finalize())
    }

    /// The transcript as JSON lines, one entry per line.
    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("entries serialize") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IdleStats {
    pub max_ms: u64,
    pub mean_ms: f64,
    pub spans: usize,
}

impl IdleStats {
    fn of<'a>(spans: impl Iterator<Item = &'a IdleSpan>) -> Self {
        let (mut max_ms, mut total, mut n) = (0, 0u64, 0usize);
        for s in spans {
            max_ms = max_ms.max(s.len());
            total += s.len();
            n += 1;
        }
        Self {
            max_ms,
            mean_ms: if n == 0 { 0.0 } else { total as f64 / n as f64 },
            spans: n,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdleReport {
    pub overall: IdleStats,
    pub per_player: BTreeMap<PlayerId, IdleStats>,
    pub per_phase: BTreeMap<PhaseId, IdleStats>,
}

/// Max and mean idle span, overall, per player and per phase. Zero-length
/// spans are ignored; an empty transcript gives all zeros.
pub fn idle_metric(t: &Transcript) -> IdleReport {
    let all = || t.idle.values().flatten().filter(|s| !s.is_empty());
    let mut per_phase = BTreeMap::new();
    for phase in PhaseId::ALL {
        let stats = IdleStats::of(all().filter(|s| s.phase == phase));
        if stats.spans > 0 {
            per_phase.insert(phase, stats);
        }
    }
    IdleReport {
        overall: IdleStats::of(all()),
        per_player: t
            .idle
            .iter()
            .map(|(p, spans)| {
                (
                    p.clone(),
                    IdleStats::of(spans.iter().filter(|s| !s.is_empty())),
                )
            })
            .collect(),
        per_phase,
    }
}

/// Turns per-step `idle_since` readings into spans split at phase changes.
#[derive(Debug, Default)]
pub(crate) struct IdleTracker {
    open: BTreeMap<PlayerId, (PhaseId, u64)>,
    phase_start: u64,
    phase: Option<PhaseId>,
}

impl IdleTracker {
    pub(crate) fn observe(
        &mut self,
        t: &mut Transcript,
        now: u64,
        phase: PhaseId,
        idle_since: &BTreeMap<PlayerId, Option<u64>>,
        connected: impl Fn(&PlayerId) -> bool,
    ) {
        if self.phase != Some(phase) {
            self.close_all(t, now);
            self.phase = Some(phase);
            self.phase_start = now;
        }
        for (p, since) in idle_since {
            match (since, self.open.contains_key(p)) {
                (Some(s), false) if connected(p) => {
                    self.open
                        .insert(p.clone(), (phase, (*s).max(self.phase_start)));
                }
                (Some(_), true) if !connected(p) => self.close(t, p, now),
                (None, true) => self.close(t, p, now),
                _ => {}
            }
        }
    }

    fn close(&mut self, t: &mut Transcript, p: &PlayerId, now: u64) {
        if let Some((phase, start)) = self.open.remove(p) {
            t.idle.entry(p.clone()).or_default().push(IdleSpan {
                phase,
                start,
                end: now.max(start),
            });
        }
    }

    pub(crate) fn close_all(&mut self, t: &mut Transcript, now: u64) {
        let open: Vec<PlayerId> = self.open.keys().cloned().collect();
        for p in open {
            self.close(t, &p, now);
        }
    }
}

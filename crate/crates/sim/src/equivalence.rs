//! Resuming from a checkpoint must be indistinguishable from never stopping.
//!
//! A compliant session is run in process; its event log is then replayed
//! from the initial state. At each chosen point the replayed state goes
//! through the checkpoint codec, the rest of the log is applied to the
//! decoded copy, and the result is compared with the uninterrupted run.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use classplay_core::engine::assign::rng_for;
use classplay_core::engine::checkpoint::{decode_checkpoint, encode_checkpoint, read_header};
use classplay_core::engine::{apply, create_session, Effect, SessionState};
use classplay_core::scenario::Scenario;
use classplay_server::CheckpointStore;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::run::{room_setup, run_on, SimConfig};
use crate::transport::InProcess;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceCase {
    /// Why this index was chosen, `+`-joined: `stored:<name>`, `random`, `phase:<Phase>`.
    pub label: String,
    /// Number of log events applied before the checkpoint.
    pub index: usize,
    /// Decoding the encoded state gives the same state.
    pub roundtrip: bool,
    /// Finishing from the decoded state reaches the same final state.
    pub resumed: bool,
    /// ... while emitting the same effects.
    pub effects: bool,
}

impl EquivalenceCase {
    pub fn ok(&self) -> bool {
        self.roundtrip && self.resumed && self.effects
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub events: usize,
    /// Replaying the whole log reproduces the room's final state.
    pub replay_matches_room: bool,
    pub cases: Vec<EquivalenceCase>,
}

impl EquivalenceReport {
    pub fn ok(&self) -> bool {
        self.replay_matches_room && !self.cases.is_empty() && self.cases.iter().all(|c| c.ok())
    }
}

/// Checks every phase boundary, every checkpoint the room stored, and
/// `random_points` further log positions drawn from the run seed.
pub fn checkpoint_equivalence(
    scenario: &Scenario,
    config: &SimConfig,
    random_points: usize,
) -> Result<EquivalenceReport, SimError> {
    let setup = room_setup(config);
    let mut room = InProcess::open(Arc::new(scenario.clone()), setup.clone(), config.stride)?;
    run_on(scenario, config, &mut room, &setup.join_code)?;
    let log = room.core().log().to_vec();
    let init = create_session(
        scenario,
        &setup.join_code,
        &setup.roster,
        Some(setup.teacher.clone()),
        setup.seed,
        setup.session.clone(),
    )
    .map_err(classplay_server::ServerError::from)?;
    let base = init.event_seq;

    // Labels per log index; one index can be several kinds of point.
    let mut points: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let store = room.store();
    for name in store.list().map_err(classplay_server::ServerError::from)? {
        if let Some(bytes) = store
            .load(&name)
            .map_err(classplay_server::ServerError::from)?
        {
            let h = read_header(&bytes).map_err(classplay_server::ServerError::from)?;
            points
                .entry((h.event_seq - base) as usize)
                .or_default()
                .push(format!("stored:{name}"));
        }
    }
    // Distinct random indices, as many as the log allows.
    let mut rng = rng_for(config.seed, "checkpoint_points", 0);
    let mut random = BTreeSet::new();
    while random.len() < random_points.min(log.len() + 1) {
        random.insert(rng.random_range(0..=log.len()));
    }
    for i in random {
        points.entry(i).or_default().push("random".into());
    }

    // One pass over the log: remember the state at every chosen point, the
    // effects of every event, and where phases change.
    let mut st = init;
    let mut snapshots: BTreeMap<usize, SessionState> = BTreeMap::new();
    let mut effects: Vec<Vec<Effect>> = Vec::with_capacity(log.len());
    for (i, ev) in log.iter().enumerate() {
        let before = st.phase;
        if i == 0 || points.contains_key(&i) {
            snapshots.insert(i, st.clone());
        }
        effects.push(apply(scenario, &mut st, ev));
        if st.phase != before {
            points
                .entry(i + 1)
                .or_default()
                .push(format!("phase:{}", st.phase));
        }
    }
    let final_state = st;
    for (&i, _) in points.range(..) {
        if !snapshots.contains_key(&i) {
            snapshots.insert(i, replay(scenario, &snapshots, &log, i, &final_state));
        }
    }
    let hash = scenario.content_hash();
    let mut cases = Vec::new();
    for (&index, labels) in &points {
        let at = &snapshots[&index];
        let bytes = encode_checkpoint(at, &hash);
        let decoded =
            decode_checkpoint(&bytes, scenario).map_err(classplay_server::ServerError::from)?;
        let roundtrip = &decoded == at;
        let mut resumed = decoded;
        let mut same_effects = true;
        for (ev, expected) in log[index..].iter().zip(&effects[index..]) {
            if &apply(scenario, &mut resumed, ev) != expected {
                same_effects = false;
            }
        }
        cases.push(EquivalenceCase {
            label: labels.join("+"),
            index,
            roundtrip,
            resumed: resumed == final_state,
            effects: same_effects,
        });
    }
    Ok(EquivalenceReport {
        events: log.len(),
        replay_matches_room: &final_state == room.core().state(),
        cases,
    })
}

/// State after `index` events, from the nearest earlier snapshot.
fn replay(
    scenario: &Scenario,
    snapshots: &BTreeMap<usize, SessionState>,
    log: &[classplay_core::engine::Event],
    index: usize,
    final_state: &SessionState,
) -> SessionState {
    if index == log.len() {
        return final_state.clone();
    }
    let (&from, start) = snapshots
        .range(..=index)
        .next_back()
        .expect("index 0 precedes every phase change");
    let mut st = start.clone();
    for ev in &log[from..index] {
        apply(scenario, &mut st, ev);
    }
    st
}

//! Runtime invariant checks over states, effects and views.

use std::collections::BTreeSet;
use std::fmt;

use super::event::Effect;
use super::state::SessionState;
use super::view::PlayerView;
use crate::ids::FragmentId;
use crate::phase::PhaseId;
use crate::protocol::Body;
use crate::scenario::{Scenario, Track};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Invariant {
    EqualStart,
    Complementarity,
    Coverage,
    DiaryOrder,
    NoLeak,
}

impl Invariant {
    pub const ALL: [Invariant; 5] = [
        Invariant::EqualStart,
        Invariant::Complementarity,
        Invariant::Coverage,
        Invariant::DiaryOrder,
        Invariant::NoLeak,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Invariant::EqualStart => "EQUAL-START",
            Invariant::Complementarity => "COMPLEMENTARITY",
            Invariant::Coverage => "COVERAGE",
            Invariant::DiaryOrder => "DIARY-ORDER",
            Invariant::NoLeak => "NO-LEAK",
        }
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub invariant: Invariant,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

fn violation(invariant: Invariant, detail: String) -> Violation {
    Violation { invariant, detail }
}

/// Nobody holds any artifact before discovery starts.
pub fn check_equal_start(st: &SessionState) -> Vec<Violation> {
    if st.phase > PhaseId::NotepadDiscovery {
        return Vec::new();
    }
    st.players
        .values()
        .filter(|p| !p.discovered.is_empty())
        .map(|p| {
            violation(
                Invariant::EqualStart,
                format!("{} holds {:?} in {}", p.player_id, p.discovered, st.phase),
            )
        })
        .collect()
}

/// At the pair puzzle, the connected track-A and track-B members of every
/// pair hold disjoint, nonempty sets of track artifacts.
pub fn check_complementarity(s: &Scenario, st: &SessionState) -> Vec<Violation> {
    let mut out = Vec::new();
    if st.phase != PhaseId::PairPuzzle {
        return out;
    }
    for pair in &st.pairs {
        let held = |t: Track| -> BTreeSet<_> {
            pair.unit
                .members
                .iter()
                .filter_map(|m| st.players.get(m))
                .filter(|p| p.connected && p.track == t)
                .flat_map(|p| p.discovered.iter())
                .filter(|a| s.artifact(a.as_str()).is_some_and(|d| !d.is_unlock()))
                .cloned()
                .collect()
        };
        let present = |t: Track| {
            pair.unit.members.iter().any(|m| {
                st.players
                    .get(m)
                    .is_some_and(|p| p.connected && p.track == t)
            })
        };
        if !(present(Track::A) && present(Track::B)) {
            continue;
        }
        let (a, b) = (held(Track::A), held(Track::B));
        if a.is_empty() || b.is_empty() {
            out.push(violation(
                Invariant::Complementarity,
                format!("pair {} has an empty side", pair.unit.id),
            ));
        }
        let shared: Vec<_> = a.intersection(&b).collect();
        if !shared.is_empty() {
            out.push(violation(
                Invariant::Complementarity,
                format!("pair {} shares {shared:?}", pair.unit.id),
            ));
        }
    }
    out
}

/// Fragments revealed to at least one player through discovered artifacts.
pub fn revealed_fragments(s: &Scenario, st: &SessionState) -> BTreeSet<FragmentId> {
    st.players
        .values()
        .flat_map(|p| p.discovered.iter())
        .filter_map(|a| s.artifact(a.as_str()))
        .flat_map(|a| a.fragment_ids.iter().cloned())
        .collect()
}

/// At the end, revealed fragments plus the teacher's fragments cover the
/// scenario's whole fragment set.
pub fn check_coverage(s: &Scenario, st: &SessionState) -> Vec<Violation> {
    if st.phase != PhaseId::Ended {
        return Vec::new();
    }
    let mut covered = revealed_fragments(s, st);
    covered.extend(s.teacher_fragments.iter().cloned());
    s.fragments
        .iter()
        .filter(|f| !covered.contains(&f.fragment_id))
        .map(|f| {
            violation(
                Invariant::Coverage,
                format!("fragment {} never revealed", f.fragment_id),
            )
        })
        .collect()
}

/// `reads` lists the diary orders in the sequence they were read; it must be
/// exactly `0..diary.len()`.
pub fn check_diary_order(s: &Scenario, reads: &[usize]) -> Vec<Violation> {
    let expected: Vec<usize> = (0..s.diary.len()).collect();
    if reads == expected.as_slice() {
        Vec::new()
    } else {
        vec![violation(
            Invariant::DiaryOrder,
            format!("read order {reads:?}, expected {expected:?}"),
        )]
    }
}

/// Effects emitted by a transition only carry private content to the
/// players entitled to it. `st` is the state after the transition.
pub fn check_effects_no_leak(st: &SessionState, effects: &[Effect]) -> Vec<Violation> {
    let mut out = Vec::new();
    for fx in effects {
        match fx {
            Effect::Broadcast { msg } => {
                let private = match msg {
                    Body::Reveal(_) | Body::DiaryAssign(_) => true,
                    Body::TeacherInfo(t) => t.fragment.is_some(),
                    _ => false,
                };
                if private {
                    out.push(violation(
                        Invariant::NoLeak,
                        format!("{} broadcast to everyone", msg.type_name()),
                    ));
                }
            }
            Effect::SendTo { to, msg } => {
                for p in to {
                    if let Some(v) = leak_to(st, p, msg) {
                        out.push(violation(Invariant::NoLeak, v));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

fn leak_to(st: &SessionState, p: &crate::ids::PlayerId, msg: &Body) -> Option<String> {
    match msg {
        Body::Reveal(r) => {
            let holds = st
                .players
                .get(p)
                .is_some_and(|ps| ps.has_discovered(&r.artifact_id));
            (!holds).then(|| format!("{} sent to {p}, who has not discovered it", r.artifact_id))
        }
        Body::TeacherInfo(t) => {
            let f = t.fragment.as_ref()?;
            let heard = st
                .players
                .get(p)
                .is_some_and(|ps| ps.heard.contains(&f.fragment_id));
            (!heard).then(|| format!("teacher fragment {} sent to {p}", f.fragment_id))
        }
        Body::DiaryAssign(d) => {
            let held = st.diary_assignment.get(p);
            let ok = d
                .fragments
                .iter()
                .all(|l| held.is_some_and(|h| h.contains(&l.order)));
            (!ok).then(|| format!("diary pages sent to {p}, who does not hold them"))
        }
        _ => None,
    }
}

/// A view holds only the player's own discoveries and own group's fragments.
pub fn check_view_no_leak(st: &SessionState, view: &PlayerView) -> Vec<Violation> {
    let mut out = Vec::new();
    let Some(p) = st.players.get(&view.player_id) else {
        if !view.reveals.is_empty() || !view.heard.is_empty() {
            out.push(violation(
                Invariant::NoLeak,
                format!(
                    "facilitator view of {} carries player content",
                    view.player_id
                ),
            ));
        }
        return out;
    };
    for r in &view.reveals {
        if !p.has_discovered(&r.artifact_id) {
            out.push(violation(
                Invariant::NoLeak,
                format!("view of {} shows {}", p.player_id, r.artifact_id),
            ));
        }
    }
    let own_group = st.group_of(&p.player_id);
    for f in &view.heard {
        let from_own = st
            .groups
            .iter()
            .filter(|g| g.teacher_fragment.as_ref() == Some(&f.fragment_id))
            .any(|g| own_group.is_some_and(|o| o.unit.id == g.unit.id));
        if !from_own {
            out.push(violation(
                Invariant::NoLeak,
                format!(
                    "view of {} shows teacher fragment {}",
                    p.player_id, f.fragment_id
                ),
            ));
        }
    }
    out
}

/// State-level checks that apply to the current phase.
pub fn check_state(s: &Scenario, st: &SessionState) -> Vec<Violation> {
    let mut out = check_equal_start(st);
    out.extend(check_complementarity(s, st));
    out.extend(check_coverage(s, st));
    out
}

//! Static checks that a scenario can be played fairly by every supported
//! class size.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Scenario, Track};
use crate::engine::assign::deal_diary;
use crate::ids::{ArtifactId, FragmentId, MarkerId, PlayerId};
use crate::phase::PhaseId;

/// Smallest roster that has a {3,4} group partition and two nonempty tracks.
pub const MIN_SUPPORTED_PLAYERS: usize = 6;

/// Phases whose hint timers the engine arms.
pub const HINTABLE_PHASES: [PhaseId; 5] = [
    PhaseId::IndividualDiscovery,
    PhaseId::PairFormation,
    PhaseId::PairPuzzle,
    PhaseId::GroupFormation,
    PhaseId::GroupPuzzle,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "INFO",
            Severity::Warning => "WARNING",
            Severity::Error => "ERROR",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CheckCode {
    #[serde(rename = "STRUCTURE")]
    Structure,
    #[serde(rename = "EQUAL-START")]
    EqualStart,
    #[serde(rename = "COVERAGE")]
    Coverage,
    #[serde(rename = "PAIR-SOLVABILITY")]
    PairSolvability,
    #[serde(rename = "UNLOCK-GRAPH")]
    UnlockGraph,
    #[serde(rename = "GROUP-FEASIBILITY")]
    GroupFeasibility,
    #[serde(rename = "DIARY-FIT")]
    DiaryFit,
    #[serde(rename = "HINT-POLICY")]
    HintPolicy,
}

impl CheckCode {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckCode::Structure => "STRUCTURE",
            CheckCode::EqualStart => "EQUAL-START",
            CheckCode::Coverage => "COVERAGE",
            CheckCode::PairSolvability => "PAIR-SOLVABILITY",
            CheckCode::UnlockGraph => "UNLOCK-GRAPH",
            CheckCode::GroupFeasibility => "GROUP-FEASIBILITY",
            CheckCode::DiaryFit => "DIARY-FIT",
            CheckCode::HintPolicy => "HINT-POLICY",
        }
    }
}

impl fmt::Display for CheckCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: CheckCode,
    pub message: String,
    pub location: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}: {}",
            self.severity, self.code, self.location, self.message
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
    }

    pub fn has(&self, severity: Severity, code: CheckCode) -> bool {
        self.diagnostics
            .iter()
            .any(|d| d.severity == severity && d.code == code)
    }
}

/// Knowledge a pair brings to its puzzle: the artifacts held by its track-A
/// members and by its track-B members.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairState {
    pub set_a: BTreeSet<ArtifactId>,
    pub set_b: BTreeSet<ArtifactId>,
}

/// Splits `n` players into `(fours, threes)` using the fewest threes.
pub fn group_partition(n: usize) -> Option<(usize, usize)> {
    let threes = (4 - n % 4) % 4;
    if n == 0 || 3 * threes > n {
        return None;
    }
    Some(((n - 3 * threes) / 4, threes))
}

fn is_code(s: &str) -> bool {
    (1..=6).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_digit())
}

struct Checker<'a> {
    s: &'a Scenario,
    out: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn push(
        &mut self,
        severity: Severity,
        code: CheckCode,
        location: impl Into<String>,
        message: impl Into<String>,
    ) {
        self.out.push(Diagnostic {
            severity,
            code,
            message: message.into(),
            location: location.into(),
        });
    }

    fn error(&mut self, code: CheckCode, location: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Error, code, location, message);
    }

    fn sizes(&self) -> std::ops::RangeInclusive<usize> {
        self.s.min_players..=self.s.max_players
    }

    fn structure(&mut self) {
        use CheckCode::Structure;
        let s = self.s;
        if s.scenario_id.trim().is_empty() {
            self.error(Structure, "scenario_id", "scenario_id is empty");
        }
        for m in &s.markers {
            if m.marker_id.as_str().is_empty() {
                self.error(Structure, "markers", "marker with empty id");
            }
            if m.location_label.trim().is_empty() {
                self.error(
                    Structure,
                    format!("marker \"{}\"", m.marker_id),
                    "location_label is empty",
                );
            }
        }
        for f in &s.fragments {
            if f.text.trim().is_empty() {
                self.error(
                    Structure,
                    format!("fragment \"{}\"", f.fragment_id),
                    "fragment text is empty",
                );
            }
        }
        for a in &s.artifacts {
            let loc = format!("artifact \"{}\"", a.artifact_id);
            if a.fragment_ids.is_empty() {
                self.error(Structure, &loc, "artifact carries no fragments");
            }
            match (a.track, a.order) {
                (Some(_), None) => self.error(Structure, &loc, "discovery artifact has no order"),
                (None, Some(_)) => self.error(
                    Structure,
                    &loc,
                    "order given for an artifact without a track",
                ),
                _ => {}
            }
        }
        for track in Track::BOTH {
            let mut orders: Vec<usize> = s
                .artifacts
                .iter()
                .filter(|a| a.track == Some(track))
                .filter_map(|a| a.order)
                .collect();
            orders.sort_unstable();
            if orders.iter().enumerate().any(|(i, &o)| i != o) {
                self.error(
                    Structure,
                    format!("track {track}"),
                    format!("artifact orders {orders:?} are not contiguous from 0"),
                );
            }
        }
        if s.roleplay_script.is_empty() {
            self.error(Structure, "roleplay_script", "roleplay script is empty");
        } else if s.roleplay_script[0].speaker != super::Speaker::Teacher {
            self.error(
                Structure,
                "roleplay_script[0]",
                "the register must be opened by the teacher",
            );
        }
        if s.discussion_prompts.is_empty() {
            self.error(Structure, "discussion_prompts", "no discussion prompts");
        }
        if s.group_tasks.is_empty() {
            self.error(Structure, "group_tasks", "no group tasks");
        }
        for t in &s.group_tasks {
            if !is_code(&t.code) {
                self.error(
                    Structure,
                    format!("group task \"{}\"", t.task_id),
                    format!("code \"{}\" is not 1-6 decimal digits", t.code),
                );
            }
        }
        if s.challenge_seconds == 0 {
            self.error(
                Structure,
                "challenge_seconds",
                "challenge duration must be positive",
            );
        }
        if s.instruments.is_empty() {
            self.push(
                Severity::Warning,
                Structure,
                "instruments",
                "no instruments; the soundscape will be silent",
            );
        }
    }

    fn equal_start(&mut self) {
        let plans: Vec<usize> = Track::BOTH
            .iter()
            .map(|&t| self.s.plan_artifacts(t).len())
            .collect();
        for (t, &n) in Track::BOTH.iter().zip(&plans) {
            if n == 0 {
                self.error(
                    CheckCode::EqualStart,
                    format!("track {t}"),
                    "track has no discovery artifacts",
                );
            }
        }
        if plans[0] != plans[1] {
            self.push(
                Severity::Warning,
                CheckCode::EqualStart,
                "tracks",
                format!(
                    "tracks discover unequal numbers of artifacts (A={}, B={})",
                    plans[0], plans[1]
                ),
            );
        }
    }

    fn pair_solvability(&mut self) -> BTreeSet<usize> {
        use CheckCode::PairSolvability;
        let s = self.s;
        for (i, e) in s.pair_code_table.iter().enumerate() {
            let loc = format!("pair_code_table[{i}]");
            if !is_code(&e.code) {
                self.error(
                    PairSolvability,
                    &loc,
                    format!("code \"{}\" is not 1-6 decimal digits", e.code),
                );
            }
            for track in Track::BOTH {
                let has = e
                    .required_artifacts
                    .iter()
                    .any(|a| s.artifact(a.as_str()).and_then(|d| d.track) == Some(track));
                if !has {
                    self.error(
                        PairSolvability,
                        &loc,
                        format!("required_artifacts has no track-{track} artifact"),
                    );
                }
            }
        }
        let mut used = BTreeSet::new();
        for state in reachable_pair_states(s) {
            let matches = matching_pair_entries(s, &state.set_a, &state.set_b);
            let loc = format!(
                "pair state A{:?} B{:?}",
                state.set_a.iter().map(|a| a.as_str()).collect::<Vec<_>>(),
                state.set_b.iter().map(|a| a.as_str()).collect::<Vec<_>>()
            );
            match matches.len() {
                0 => self.error(PairSolvability, loc, "no pair-code entry matches"),
                1 => {}
                _ => self.error(
                    PairSolvability,
                    loc,
                    format!("ambiguous code: entries {matches:?} all match"),
                ),
            }
            used.extend(matches);
        }
        for i in 0..s.pair_code_table.len() {
            if !used.contains(&i) {
                self.push(
                    Severity::Warning,
                    PairSolvability,
                    format!("pair_code_table[{i}]"),
                    "entry matches no reachable pair state",
                );
            }
        }
        used
    }

    fn unlock_graph(&mut self, live_entries: &BTreeSet<usize>) {
        use CheckCode::UnlockGraph;
        let s = self.s;
        for m in &s.markers {
            let n = s.artifacts_at(m.marker_id.as_str()).count();
            if n > 1 {
                self.error(
                    UnlockGraph,
                    format!("marker \"{}\"", m.marker_id),
                    format!("marker binds {n} artifacts"),
                );
            }
        }
        let plan_a = s.discovery_plan(Track::A);
        let plan_b = s.discovery_plan(Track::B);
        let shared: BTreeSet<&MarkerId> = plan_a.iter().filter(|m| plan_b.contains(m)).collect();
        for m in shared {
            self.error(
                UnlockGraph,
                format!("marker \"{m}\""),
                "marker appears in both discovery plans",
            );
        }

        let pair_targets: Vec<&MarkerId> = live_entries
            .iter()
            .map(|&i| &s.pair_code_table[i].unlocks_marker)
            .collect();
        let group_targets: Vec<&MarkerId> = s
            .group_tasks
            .iter()
            .filter_map(|t| t.unlocks_marker.as_ref())
            .collect();

        // The pair unlock goes to the track-A seeker; group unlocks to everyone.
        let chains = [
            (
                Track::A,
                plan_a
                    .iter()
                    .chain(pair_targets.iter().copied())
                    .chain(group_targets.iter().copied())
                    .collect::<Vec<_>>(),
            ),
            (
                Track::B,
                plan_b
                    .iter()
                    .chain(group_targets.iter().copied())
                    .collect::<Vec<_>>(),
            ),
        ];
        for (track, chain) in &chains {
            let mut seen = BTreeSet::new();
            for m in chain {
                if !seen.insert(*m) {
                    self.error(
                        UnlockGraph,
                        format!("track {track}"),
                        format!("unlock chain revisits marker \"{m}\""),
                    );
                }
            }
        }

        let unlock_targets: BTreeSet<&MarkerId> = s
            .pair_code_table
            .iter()
            .map(|e| &e.unlocks_marker)
            .chain(group_targets.iter().copied())
            .collect();
        for &m in &unlock_targets {
            if s.unlock_artifact_at(m.as_str()).is_none() {
                self.error(
                    UnlockGraph,
                    format!("marker \"{m}\""),
                    "unlock target has no unlock artifact",
                );
            }
        }
        for a in s.artifacts.iter().filter(|a| a.is_unlock()) {
            if !unlock_targets.contains(&a.marker_id) {
                self.error(
                    UnlockGraph,
                    format!("artifact \"{}\"", a.artifact_id),
                    "unlock artifact sits behind a marker nothing unlocks",
                );
            }
        }

        let reachable: BTreeSet<&MarkerId> = plan_a
            .iter()
            .chain(plan_b.iter())
            .chain(pair_targets.iter().copied())
            .chain(group_targets.iter().copied())
            .collect();
        for m in &s.markers {
            if !reachable.contains(&m.marker_id) {
                self.error(
                    UnlockGraph,
                    format!("marker \"{}\"", m.marker_id),
                    "marker is not reachable by any track or unlock",
                );
            }
        }
    }

    fn group_feasibility(&mut self) {
        use CheckCode::GroupFeasibility;
        let s = self.s;
        if s.min_players < MIN_SUPPORTED_PLAYERS {
            self.error(
                GroupFeasibility,
                "min_players",
                format!(
                    "min_players={} is below the supported minimum of {MIN_SUPPORTED_PLAYERS}",
                    s.min_players
                ),
            );
        }
        if s.max_players < s.min_players {
            self.error(
                GroupFeasibility,
                "max_players",
                format!(
                    "max_players={} < min_players={}",
                    s.max_players, s.min_players
                ),
            );
        }
        for n in self.sizes() {
            if group_partition(n).is_none() {
                self.error(
                    GroupFeasibility,
                    format!("class size {n}"),
                    format!("{n} players cannot be split into groups of 3 and 4"),
                );
            }
        }
    }

    fn coverage(&mut self, live_entries: &BTreeSet<usize>) {
        let s = self.s;
        let mut base: BTreeSet<&FragmentId> = s.teacher_fragments.iter().collect();
        for track in Track::BOTH {
            for a in s.plan_artifacts(track) {
                base.extend(a.fragment_ids.iter());
            }
        }
        for &i in live_entries {
            if let Some(a) = s.unlock_artifact_at(s.pair_code_table[i].unlocks_marker.as_str()) {
                base.extend(a.fragment_ids.iter());
            }
        }
        let task_fragments = |k: usize| -> BTreeSet<&FragmentId> {
            s.group_tasks
                .iter()
                .take(k)
                .filter_map(|t| t.unlocks_marker.as_ref())
                .filter_map(|m| s.unlock_artifact_at(m.as_str()))
                .flat_map(|a| a.fragment_ids.iter())
                .collect()
        };

        let feasible: Vec<usize> = self
            .sizes()
            .filter(|&n| group_partition(n).is_some())
            .collect();
        let group_counts: Vec<(usize, usize)> = if feasible.is_empty() {
            vec![(0, s.group_tasks.len())]
        } else {
            feasible
                .iter()
                .map(|&n| {
                    let (f, t) = group_partition(n).unwrap();
                    (n, f + t)
                })
                .collect()
        };

        let mut missing: BTreeMap<&FragmentId, Vec<usize>> = BTreeMap::new();
        for &(n, groups) in &group_counts {
            let covered: BTreeSet<&FragmentId> =
                base.iter().copied().chain(task_fragments(groups)).collect();
            for f in &s.fragments {
                if !covered.contains(&f.fragment_id) {
                    missing.entry(&f.fragment_id).or_default().push(n);
                }
            }
        }
        for (f, sizes) in missing {
            let message = if sizes.len() == group_counts.len() {
                format!("fragment \"{f}\" is never revealed")
            } else {
                format!("fragment \"{f}\" is not revealed for class sizes {sizes:?}")
            };
            self.error(CheckCode::Coverage, format!("fragment \"{f}\""), message);
        }
    }

    fn diary_fit(&mut self) {
        use CheckCode::DiaryFit;
        let s = self.s;
        if s.diary.is_empty() {
            self.error(DiaryFit, "diary", "diary is empty");
            return;
        }
        let mut orders: Vec<usize> = s.diary.iter().map(|d| d.order).collect();
        orders.sort_unstable();
        if orders.iter().enumerate().any(|(i, &o)| i != o) {
            self.error(
                DiaryFit,
                "diary",
                format!("diary orders {orders:?} are not contiguous from 0"),
            );
            return;
        }
        for n in self.sizes() {
            let holders: Vec<PlayerId> = (0..n).map(|i| PlayerId(format!("p{i}"))).collect();
            let dealt = deal_diary(&orders, &holders);
            let mut all: Vec<usize> = dealt.values().flatten().copied().collect();
            all.sort_unstable();
            if all != orders {
                self.error(
                    DiaryFit,
                    format!("class size {n}"),
                    "diary cannot be dealt so that every fragment is read exactly once",
                );
            }
        }
        if s.max_players > s.diary.len() {
            self.push(
                Severity::Info,
                DiaryFit,
                "diary",
                format!(
                    "classes larger than {} players leave some players without a diary fragment",
                    s.diary.len()
                ),
            );
        }
    }

    fn hint_policy(&mut self) {
        use CheckCode::HintPolicy;
        let mut seen = BTreeSet::new();
        for rule in &self.s.hint_policy.0 {
            let loc = format!("hint_policy[{}]", rule.phase);
            if !seen.insert(rule.phase) {
                self.error(HintPolicy, &loc, "phase listed more than once");
            }
            if rule.delay_seconds == 0 {
                self.error(HintPolicy, &loc, "delay must be positive");
            }
            if rule.hints.is_empty() {
                self.error(HintPolicy, &loc, "hint list is empty");
            }
            if !HINTABLE_PHASES.contains(&rule.phase) {
                self.push(
                    Severity::Warning,
                    HintPolicy,
                    &loc,
                    "hints for this phase are never delivered",
                );
            }
        }
    }
}

/// Every (track-A set, track-B set) a pair or trio can present at its puzzle.
///
/// Pairs are `{A,B}`, or one trio `{A,A,B}` / `{A,B,B}` on odd rosters; every
/// member has completed its track's discovery plan by then.
pub fn reachable_pair_states(s: &Scenario) -> BTreeSet<PairState> {
    let plan = |t: Track| -> BTreeSet<ArtifactId> {
        s.plan_artifacts(t)
            .into_iter()
            .map(|a| a.artifact_id.clone())
            .collect()
    };
    let compositions: [&[Track]; 3] = [
        &[Track::A, Track::B],
        &[Track::A, Track::A, Track::B],
        &[Track::A, Track::B, Track::B],
    ];
    let mut states = BTreeSet::new();
    for members in compositions {
        let mut state = PairState {
            set_a: BTreeSet::new(),
            set_b: BTreeSet::new(),
        };
        for &t in members {
            match t {
                Track::A => state.set_a.extend(plan(t)),
                Track::B => state.set_b.extend(plan(t)),
            }
        }
        if !state.set_a.is_empty() && !state.set_b.is_empty() {
            states.insert(state);
        }
    }
    states
}

/// Indices of pair-code entries whose required artifacts are all held.
pub fn matching_pair_entries(
    s: &Scenario,
    set_a: &BTreeSet<ArtifactId>,
    set_b: &BTreeSet<ArtifactId>,
) -> Vec<usize> {
    s.pair_code_table
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            e.required_artifacts
                .iter()
                .all(|a| set_a.contains(a) || set_b.contains(a))
        })
        .map(|(i, _)| i)
        .collect()
}

/// Runs every static check. Pure: equal scenarios give equal reports.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut c = Checker { s, out: Vec::new() };
    c.structure();
    c.equal_start();
    let live = c.pair_solvability();
    c.unlock_graph(&live);
    c.group_feasibility();
    c.coverage(&live);
    c.diary_fit();
    c.hint_policy();
    let ok = !c.out.iter().any(|d| d.severity == Severity::Error);
    ValidationReport {
        ok,
        diagnostics: c.out,
    }
}

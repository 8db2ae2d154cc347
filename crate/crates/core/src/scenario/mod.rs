//! Declarative scenario format: markers, artifacts, information fragments,
//! puzzles, diary and hint policy for one playable episode.

mod load;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ids::{ArtifactId, FragmentId, MarkerId};
use crate::phase::PhaseId;

/// The bundled sample scenario, valid for 6 to 36 players.
pub const SAMPLE_SCENARIO: &str = include_str!("../../scenarios/sample.json");

/// Loads [`SAMPLE_SCENARIO`].
pub fn sample_scenario() -> Scenario {
    load_scenario(SAMPLE_SCENARIO.as_bytes()).expect("bundled scenario loads")
}

pub use load::{load_scenario, LoadError, TOP_LEVEL_KEYS};
pub use validate::{
    group_partition, matching_pair_entries, reachable_pair_states, validate_scenario, CheckCode,
    Diagnostic, PairState, Severity, ValidationReport, HINTABLE_PHASES, MIN_SUPPORTED_PLAYERS,
};

/// Complementary discovery track. Partners are always drawn from opposite tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Track {
    A,
    B,
}

impl Track {
    pub const BOTH: [Track; 2] = [Track::A, Track::B];

    pub fn other(self) -> Track {
        match self {
            Track::A => Track::B,
            Track::B => Track::A,
        }
    }
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Track::A => "A",
            Track::B => "B",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown track \"{0}\"")]
pub struct UnknownTrack(pub String);

impl FromStr for Track {
    type Err = UnknownTrack;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Track::A),
            "B" | "b" => Ok(Track::B),
            other => Err(UnknownTrack(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerDef {
    pub marker_id: MarkerId,
    /// Human hint for where the marker is placed.
    pub location_label: String,
}

/// A virtual object revealed by scanning its marker.
///
/// Discovery artifacts carry a `track` and an `order` within that track.
/// Artifacts without a track are unlock artifacts: they sit behind a marker
/// that is only reachable through a pair code or a group task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactDef {
    pub artifact_id: ArtifactId,
    pub marker_id: MarkerId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track: Option<Track>,
    pub reveal_text: String,
    pub fragment_ids: Vec<FragmentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_cue: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

impl ArtifactDef {
    pub fn is_unlock(&self) -> bool {
        self.track.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoFragment {
    pub fragment_id: FragmentId,
    pub text: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairCodeEntry {
    pub required_artifacts: Vec<ArtifactId>,
    pub code: String,
    pub unlocks_marker: MarkerId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupTaskDef {
    pub task_id: String,
    pub prompt: String,
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unlocks_marker: Option<MarkerId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiaryFragment {
    pub order: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintRule {
    pub phase: PhaseId,
    pub delay_seconds: u64,
    pub hints: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HintPolicy(pub Vec<HintRule>);

impl HintPolicy {
    pub fn for_phase(&self, phase: PhaseId) -> Option<&HintRule> {
        self.0.iter().find(|r| r.phase == phase)
    }

    pub fn hint_count(&self, phase: PhaseId) -> usize {
        self.for_phase(phase).map_or(0, |r| r.hints.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Teacher,
    Player,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleLine {
    pub speaker: Speaker,
    pub prompt_text: String,
    pub ack_required: bool,
}

/// The document as it appears on disk. Top-level `x_*` keys are accepted on
/// load and dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub scenario_id: String,
    pub title: String,
    pub min_players: usize,
    pub max_players: usize,
    pub markers: Vec<MarkerDef>,
    pub artifacts: Vec<ArtifactDef>,
    pub fragments: Vec<InfoFragment>,
    pub teacher_fragments: Vec<FragmentId>,
    pub pair_code_table: Vec<PairCodeEntry>,
    pub group_tasks: Vec<GroupTaskDef>,
    pub diary: Vec<DiaryFragment>,
    pub discussion_prompts: Vec<String>,
    pub hint_policy: HintPolicy,
    pub challenge_seconds: u64,
    pub instruments: Vec<String>,
    pub roleplay_script: Vec<RoleLine>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct ScenarioIndex {
    markers: BTreeMap<MarkerId, usize>,
    artifacts: BTreeMap<ArtifactId, usize>,
    fragments: BTreeMap<FragmentId, usize>,
    artifacts_at: BTreeMap<MarkerId, Vec<usize>>,
}

/// An immutable, loaded scenario with resolved cross-references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    doc: ScenarioDoc,
    index: ScenarioIndex,
    hash: [u8; 32],
}

impl std::ops::Deref for Scenario {
    type Target = ScenarioDoc;

    fn deref(&self) -> &ScenarioDoc {
        &self.doc
    }
}

impl Scenario {
    /// Resolves every cross-reference and computes the content hash.
    pub fn from_doc(doc: ScenarioDoc) -> Result<Self, LoadError> {
        let index = load::build_index(&doc)?;
        let hash = Sha256::digest(serde_json::to_vec(&doc).expect("scenario serializes")).into();
        Ok(Self { doc, index, hash })
    }

    pub fn doc(&self) -> &ScenarioDoc {
        &self.doc
    }

    pub fn into_doc(self) -> ScenarioDoc {
        self.doc
    }

    /// Pretty-printed serialization in schema field order; loads back to an equal scenario.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("scenario serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn content_hash(&self) -> [u8; 32] {
        self.hash
    }

    pub fn content_hash_hex(&self) -> String {
        hex::encode(self.hash)
    }

    pub fn marker(&self, id: &str) -> Option<&MarkerDef> {
        self.index.markers.get(id).map(|&i| &self.doc.markers[i])
    }

    pub fn artifact(&self, id: &str) -> Option<&ArtifactDef> {
        self.index
            .artifacts
            .get(id)
            .map(|&i| &self.doc.artifacts[i])
    }

    pub fn fragment(&self, id: &str) -> Option<&InfoFragment> {
        self.index
            .fragments
            .get(id)
            .map(|&i| &self.doc.fragments[i])
    }

    pub fn artifacts_at(&self, marker: &str) -> impl Iterator<Item = &ArtifactDef> {
        self.index
            .artifacts_at
            .get(marker)
            .into_iter()
            .flatten()
            .map(|&i| &self.doc.artifacts[i])
    }

    /// The unlock artifact placed behind `marker`, if any.
    pub fn unlock_artifact_at(&self, marker: &str) -> Option<&ArtifactDef> {
        self.artifacts_at(marker).find(|a| a.is_unlock())
    }

    /// Discovery artifacts of one track, in discovery order.
    pub fn plan_artifacts(&self, track: Track) -> Vec<&ArtifactDef> {
        let mut v: Vec<&ArtifactDef> = self
            .doc
            .artifacts
            .iter()
            .filter(|a| a.track == Some(track))
            .collect();
        v.sort_by_key(|a| a.order.unwrap_or(usize::MAX));
        v
    }

    /// Marker sequence a player on `track` is directed through.
    pub fn discovery_plan(&self, track: Track) -> Vec<MarkerId> {
        self.plan_artifacts(track)
            .into_iter()
            .map(|a| a.marker_id.clone())
            .collect()
    }

    /// Diary fragments sorted by their `order`.
    pub fn diary_in_order(&self) -> Vec<&DiaryFragment> {
        let mut v: Vec<&DiaryFragment> = self.doc.diary.iter().collect();
        v.sort_by_key(|d| d.order);
        v
    }

    pub fn diary_text(&self, order: usize) -> Option<&str> {
        self.doc
            .diary
            .iter()
            .find(|d| d.order == order)
            .map(|d| d.text.as_str())
    }

    pub fn group_task(&self, index: usize) -> Option<&GroupTaskDef> {
        if self.doc.group_tasks.is_empty() {
            None
        } else {
            Some(&self.doc.group_tasks[index % self.doc.group_tasks.len()])
        }
    }
}

#[cfg(test)]
mod tests;

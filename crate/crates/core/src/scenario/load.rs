use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

use super::{Scenario, ScenarioDoc, ScenarioIndex};

/// Top-level keys a scenario document must carry, and the only ones it may
/// carry besides `x_*` extensions.
pub const TOP_LEVEL_KEYS: [&str; 16] = [
    "scenario_id",
    "title",
    "min_players",
    "max_players",
    "markers",
    "artifacts",
    "fragments",
    "teacher_fragments",
    "pair_code_table",
    "group_tasks",
    "diary",
    "discussion_prompts",
    "hint_policy",
    "challenge_seconds",
    "instruments",
    "roleplay_script",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoadError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{location} references unknown {kind} \"{id}\"")]
    Reference {
        kind: &'static str,
        id: String,
        location: String,
    },
    #[error("duplicate {kind} id \"{id}\"")]
    DuplicateId { kind: &'static str, id: String },
}

impl LoadError {
    fn syntax(err: &serde_json::Error) -> Self {
        LoadError::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    fn key(message: String) -> Self {
        LoadError::Syntax {
            line: 1,
            column: 1,
            message,
        }
    }
}

/// Parses a UTF-8 JSON scenario document and resolves its references.
pub fn load_scenario(bytes: &[u8]) -> Result<Scenario, LoadError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| LoadError::syntax(&e))?;
    let obj = value
        .as_object()
        .ok_or_else(|| LoadError::key("top level must be a JSON object".into()))?;
    for key in obj.keys() {
        if !key.starts_with("x_") && !TOP_LEVEL_KEYS.contains(&key.as_str()) {
            return Err(LoadError::key(format!("unknown top-level key \"{key}\"")));
        }
    }
    for key in TOP_LEVEL_KEYS {
        if !obj.contains_key(key) {
            return Err(LoadError::key(format!("missing top-level key \"{key}\"")));
        }
    }
    // Deserialize from the bytes again so type errors keep their positions.
    let doc: ScenarioDoc = serde_json::from_slice(bytes).map_err(|e| LoadError::syntax(&e))?;
    Scenario::from_doc(doc)
}

fn unique<'a, K>(
    kind: &'static str,
    ids: impl Iterator<Item = &'a K>,
) -> Result<BTreeMap<K, usize>, LoadError>
where
    K: Ord + Clone + std::fmt::Display + 'a,
{
    let mut map = BTreeMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id.clone(), i).is_some() {
            return Err(LoadError::DuplicateId {
                kind,
                id: id.to_string(),
            });
        }
    }
    Ok(map)
}

pub(super) fn build_index(doc: &ScenarioDoc) -> Result<ScenarioIndex, LoadError> {
    let markers = unique("marker", doc.markers.iter().map(|m| &m.marker_id))?;
    let artifacts = unique("artifact", doc.artifacts.iter().map(|a| &a.artifact_id))?;
    let fragments = unique("fragment", doc.fragments.iter().map(|f| &f.fragment_id))?;
    let mut task_ids = BTreeSet::new();
    for t in &doc.group_tasks {
        if !task_ids.insert(t.task_id.as_str()) {
            return Err(LoadError::DuplicateId {
                kind: "group task",
                id: t.task_id.clone(),
            });
        }
    }

    let missing = |kind, id: &dyn std::fmt::Display, location: String| LoadError::Reference {
        kind,
        id: id.to_string(),
        location,
    };

    let mut artifacts_at: BTreeMap<_, Vec<usize>> = BTreeMap::new();
    for (i, a) in doc.artifacts.iter().enumerate() {
        let loc = format!("artifact \"{}\"", a.artifact_id);
        if !markers.contains_key(&a.marker_id) {
            return Err(missing("marker", &a.marker_id, loc));
        }
        for f in &a.fragment_ids {
            if !fragments.contains_key(f) {
                return Err(missing("fragment", f, loc.clone()));
            }
        }
        artifacts_at.entry(a.marker_id.clone()).or_default().push(i);
    }
    for f in &doc.teacher_fragments {
        if !fragments.contains_key(f) {
            return Err(missing("fragment", f, "teacher_fragments".into()));
        }
    }
    for (i, e) in doc.pair_code_table.iter().enumerate() {
        let loc = format!("pair_code_table[{i}]");
        for a in &e.required_artifacts {
            if !artifacts.contains_key(a) {
                return Err(missing("artifact", a, loc.clone()));
            }
        }
        if !markers.contains_key(&e.unlocks_marker) {
            return Err(missing("marker", &e.unlocks_marker, loc));
        }
    }
    for t in &doc.group_tasks {
        if let Some(m) = &t.unlocks_marker {
            if !markers.contains_key(m) {
                return Err(missing(
                    "marker",
                    m,
                    format!("group task \"{}\"", t.task_id),
                ));
            }
        }
    }
    Ok(ScenarioIndex {
        markers,
        artifacts,
        fragments,
        artifacts_at,
    })
}

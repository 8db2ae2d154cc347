use super::*;

fn sample_doc() -> serde_json::Value {
    serde_json::from_str(SAMPLE_SCENARIO).unwrap()
}

fn load_value(v: &serde_json::Value) -> Result<Scenario, LoadError> {
    load_scenario(serde_json::to_string_pretty(v).unwrap().as_bytes())
}

#[test]
fn sample_loads_and_validates_clean() {
    let s = sample_scenario();
    let report = validate_scenario(&s);
    assert!(report.ok, "{:#?}", report.diagnostics);
    assert!(report
        .diagnostics
        .iter()
        .all(|d| d.severity != Severity::Error && d.severity != Severity::Warning));
}

#[test]
fn plans_follow_order_and_are_disjoint() {
    let s = sample_scenario();
    let a = s.discovery_plan(Track::A);
    let b = s.discovery_plan(Track::B);
    assert_eq!(a, vec![MarkerId::from("m1"), MarkerId::from("m2")]);
    assert_eq!(b, vec![MarkerId::from("m3"), MarkerId::from("m4")]);
}

#[test]
fn content_hash_ignores_formatting_and_extension_keys() {
    let s = sample_scenario();
    let mut v = sample_doc();
    v["x_editor"] = serde_json::json!({"cursor": 12});
    let compact = serde_json::to_string(&v).unwrap();
    let t = load_scenario(compact.as_bytes()).unwrap();
    assert_eq!(s.content_hash(), t.content_hash());
    assert_eq!(s.content_hash_hex().len(), 64);
}

#[test]
fn content_hash_changes_with_content() {
    let s = sample_scenario();
    let mut v = sample_doc();
    v["title"] = "Another title".into();
    assert_ne!(s.content_hash(), load_value(&v).unwrap().content_hash());
}

#[test]
fn round_trip_through_to_json() {
    let s = sample_scenario();
    let again = load_scenario(s.to_json().as_bytes()).unwrap();
    assert_eq!(s, again);
}

#[test]
fn syntax_error_reports_position() {
    let err = load_scenario(b"{\n  \"scenario_id\": \"x\",\n  oops\n}").unwrap_err();
    match err {
        LoadError::Syntax { line, .. } => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unknown_top_level_key_is_rejected() {
    let mut v = sample_doc();
    v["surprise"] = 1.into();
    assert!(matches!(load_value(&v), Err(LoadError::Syntax { .. })));
}

#[test]
fn missing_top_level_key_is_rejected() {
    let mut v = sample_doc();
    v.as_object_mut().unwrap().remove("diary");
    let err = load_value(&v).unwrap_err();
    assert!(err.to_string().contains("diary"), "{err}");
}

#[test]
fn dangling_marker_reference_is_rejected() {
    let mut v = sample_doc();
    v["artifacts"][0]["marker_id"] = "m99".into();
    match load_value(&v).unwrap_err() {
        LoadError::Reference { kind, id, .. } => {
            assert_eq!(kind, "marker");
            assert_eq!(id, "m99");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn duplicate_marker_is_rejected() {
    let mut v = sample_doc();
    let first = v["markers"][0].clone();
    v["markers"].as_array_mut().unwrap().push(first);
    assert!(matches!(
        load_value(&v),
        Err(LoadError::DuplicateId { kind: "marker", .. })
    ));
}

#[test]
fn orphan_fragment_fails_coverage_by_name() {
    let mut v = sample_doc();
    v["fragments"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!({"fragment_id": "f_mother", "text": "Her mother is ill."}));
    let report = validate_scenario(&load_value(&v).unwrap());
    assert!(!report.ok);
    let d = report
        .errors()
        .find(|d| d.code == CheckCode::Coverage)
        .expect("coverage error");
    assert!(d.to_string().contains("f_mother"), "{d}");
}

#[test]
fn ambiguous_pair_code_fails_solvability() {
    let mut v = sample_doc();
    v["pair_code_table"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!(
            {"required_artifacts": ["ticket", "headphones"], "code": "12", "unlocks_marker": "m5"}
        ));
    let report = validate_scenario(&load_value(&v).unwrap());
    assert!(report.has(Severity::Error, CheckCode::PairSolvability));
}

#[test]
fn missing_pair_code_fails_solvability() {
    let mut v = sample_doc();
    v["pair_code_table"] = serde_json::json!([]);
    // The pair unlock marker becomes unreachable as well.
    let report = validate_scenario(&load_value(&v).unwrap());
    assert!(report.has(Severity::Error, CheckCode::PairSolvability));
}

#[test]
fn infeasible_class_size_is_flagged() {
    let mut v = sample_doc();
    v["min_players"] = 5.into();
    let report = validate_scenario(&load_value(&v).unwrap());
    assert!(report.has(Severity::Error, CheckCode::GroupFeasibility));
}

#[test]
fn discovery_marker_shared_by_tracks_is_flagged() {
    let mut v = sample_doc();
    v["artifacts"][2]["marker_id"] = "m1".into();
    v["markers"].as_array_mut().unwrap().remove(2);
    let report = validate_scenario(&load_value(&v).unwrap());
    assert!(report.has(Severity::Error, CheckCode::UnlockGraph));
}

#[test]
fn empty_track_fails_equal_start() {
    let mut v = sample_doc();
    for i in [2, 3] {
        v["artifacts"][i]["track"] = "A".into();
        v["artifacts"][i]["order"] = (i).into();
    }
    let report = validate_scenario(&load_value(&v).unwrap());
    assert!(report.has(Severity::Error, CheckCode::EqualStart));
}

#[test]
fn unreachable_marker_is_flagged() {
    let mut v = sample_doc();
    v["markers"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!({"marker_id": "m_attic", "location_label": "Attic"}));
    let report = validate_scenario(&load_value(&v).unwrap());
    assert!(report.has(Severity::Error, CheckCode::UnlockGraph));
}

#[test]
fn hints_for_unhinted_phase_warn() {
    let mut v = sample_doc();
    v["hint_policy"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!(
            {"phase": "DiaryCircle", "delay_seconds": 10, "hints": ["Read slowly."]}
        ));
    let report = validate_scenario(&load_value(&v).unwrap());
    assert!(report.ok);
    assert!(report.has(Severity::Warning, CheckCode::HintPolicy));
}

#[test]
fn validation_is_pure() {
    let s = sample_scenario();
    assert_eq!(validate_scenario(&s), validate_scenario(&s));
}

#[test]
fn group_partition_uses_fewest_threes() {
    assert_eq!(group_partition(6), Some((0, 2)));
    assert_eq!(group_partition(7), Some((1, 1)));
    assert_eq!(group_partition(8), Some((2, 0)));
    assert_eq!(group_partition(9), Some((0, 3)));
    assert_eq!(group_partition(5), None);
    assert_eq!(group_partition(0), None);
}

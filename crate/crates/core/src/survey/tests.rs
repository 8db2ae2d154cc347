use super::*;

fn row(items: [u8; ITEM_COUNT]) -> Respondent {
    Respondent {
        id: "r".into(),
        sex: None,
        items: items.map(Some),
    }
}

fn matrix(rows: Vec<Respondent>) -> SurveyMatrix {
    SurveyMatrix { rows }
}

#[test]
fn default_map_is_well_formed() {
    let map = SubscaleMap::default();
    assert_eq!(map.constructs.len(), 9);
    let mut all: Vec<usize> = map.columns.iter().flatten().copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..18).collect::<Vec<_>>());
    // The reverse-coded "bored" item sits with "fun" under enjoyment.
    assert_eq!(
        map.reverse_coded.iter().copied().collect::<Vec<_>>(),
        vec![7]
    );
    let enjoyment = map
        .constructs
        .iter()
        .position(|c| c.name == "enjoyment")
        .unwrap();
    assert_eq!(map.columns[enjoyment], [6, 7]);
}

#[test]
fn map_rejects_reused_items() {
    let text = DEFAULT_ITEM_MAP.replace("[\"i03\", \"i04\"]", "[\"i01\", \"i04\"]");
    assert!(matches!(
        SubscaleMap::from_json(&text),
        Err(SurveyError::ItemMap(_))
    ));
}

#[test]
fn recode_examples() {
    let map = SubscaleMap::default();
    let mut r = row([4; ITEM_COUNT]);
    r.items[7] = Some(5);
    let out = recode(&matrix(vec![r.clone()]), &map);
    assert_eq!(out.rows[0].items[7], Some(1));
    assert_eq!(out.rows[0].items[0], Some(4));
    r.items[7] = Some(3);
    assert_eq!(
        recode(&matrix(vec![r.clone()]), &map).rows[0].items[7],
        Some(3)
    );
    r.items[7] = None;
    assert_eq!(recode(&matrix(vec![r]), &map).rows[0].items[7], None);
}

#[test]
fn all_threes_score_27() {
    let map = SubscaleMap::default();
    let m = recode(&matrix(vec![row([3; ITEM_COUNT])]), &map);
    let s = &score(&m, &map)[0];
    assert!(s.subscales.iter().all(|&x| x == Some(3.0)));
    assert_eq!(s.overall, Some(27.0));
}

#[test]
fn maximally_positive_scores_45() {
    let map = SubscaleMap::default();
    let mut items = [5; ITEM_COUNT];
    items[7] = 1;
    let m = recode(&matrix(vec![row(items)]), &map);
    assert_eq!(score(&m, &map)[0].overall, Some(45.0));
}

#[test]
fn hand_scored_fixture() {
    let map = SubscaleMap::default();
    let raw = read_csv(&include_bytes!("../../tests/fixtures/scores_hand.csv")[..]).unwrap();
    let scores = score(&recode(&raw, &map), &map);
    let expected = [4.5, 2.5, 1.5, 4.0, 5.0, 3.5, 2.5, 4.0, 2.5];
    let got: Vec<f64> = scores[0].subscales.iter().map(|x| x.unwrap()).collect();
    assert_eq!(got, expected);
    assert_eq!(scores[0].overall, Some(30.0));
    assert_eq!(scores[0].sex, Some(Sex::F));
    // r2 misses one usability item.
    let usability = map
        .constructs
        .iter()
        .position(|c| c.name == "usability_playability")
        .unwrap();
    assert_eq!(scores[1].subscales[usability], None);
    assert_eq!(scores[1].overall, None);
    assert_eq!(scores[1].subscales.iter().flatten().count(), 8);
}

#[test]
fn alpha_identical_columns_is_one() {
    let rows: Vec<Respondent> = (1..=5).map(|x| row([x; ITEM_COUNT])).collect();
    let a = cronbach_alpha(&matrix(rows)).unwrap();
    assert!((a - 1.0).abs() <= 1e-12, "{a}");
}

#[test]
fn alpha_constant_matrix_is_degenerate() {
    let rows = vec![row([4; ITEM_COUNT]), row([4; ITEM_COUNT])];
    assert_eq!(cronbach_alpha(&matrix(rows)), Err(SurveyError::Degenerate));
}

#[test]
fn alpha_uses_complete_rows_only() {
    let mut partial = row([1; ITEM_COUNT]);
    partial.items[3] = None;
    let rows = vec![row([2; ITEM_COUNT]), partial, row([3; ITEM_COUNT])];
    let a = cronbach_alpha(&matrix(rows)).unwrap();
    assert!((a - 1.0).abs() < 1e-12);
    let one = vec![row([2; ITEM_COUNT])];
    assert!(matches!(
        cronbach_alpha(&matrix(one)),
        Err(SurveyError::TooFewRows { found: 1, .. })
    ));
}

#[test]
fn descriptives_examples() {
    let map = SubscaleMap::default();
    let single = descriptives(&matrix(vec![row([4; ITEM_COUNT])]), &map);
    assert!(single
        .items
        .iter()
        .all(|d| d.sd.is_none() && d.mean == Some(4.0)));
    let rows = vec![
        row([4; ITEM_COUNT]),
        row([4; ITEM_COUNT]),
        row([4; ITEM_COUNT]),
    ];
    let constant = descriptives(&matrix(rows), &map);
    assert!(constant
        .items
        .iter()
        .all(|d| d.sd == Some(0.0) && d.mean == Some(4.0)));

    // Column [1, 2, 4]: mean 7/3, sample variance 7/3.
    let d = descriptive("x", &[1.0, 2.0, 4.0]);
    assert!((d.mean.unwrap() - 7.0 / 3.0).abs() < 1e-12);
    assert!((d.variance.unwrap() - 7.0 / 3.0).abs() < 1e-12);
    assert!((d.sd.unwrap() - (7.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert_eq!((d.min, d.max), (Some(1.0), Some(4.0)));
}

#[test]
fn mann_whitney_examples() {
    let r = mann_whitney(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
    assert_eq!(r.u, 0.0);
    assert!(r.z < 0.0);
    let same = [1.0, 2.0, 3.0, 4.0];
    let r = mann_whitney(&same, &same).unwrap();
    assert_eq!(r.u, 8.0);
    assert_eq!(r.z, 0.0);
    assert_eq!(mann_whitney(&[], &[1.0]), Err(SurveyError::EmptyGroup));
    let tied = mann_whitney(&[4.0; 3], &[4.0; 4]).unwrap();
    assert_eq!((tied.u, tied.z, tied.p), (6.0, 0.0, 1.0));
}

/// Reference values from an independent implementation of the same test
/// (midranks, tie-corrected variance, no continuity correction).
#[test]
fn mann_whitney_reference_values() {
    let cases: [(&[f64], &[f64], f64, f64); 3] = [
        (&[1.0, 2.0], &[3.0, 4.0], 0.0, 0.12133525035848211),
        (
            &[1.0, 2.0, 2.0, 3.0, 5.0],
            &[2.0, 3.0, 3.0, 4.0, 4.0, 6.0],
            8.0,
            0.19189590332395567,
        ),
        (
            &[3.5, 1.0, 2.0, 5.0, 5.0, 5.0, 4.0],
            &[2.0, 2.0, 3.0, 1.0],
            22.5,
            0.10095321559949731,
        ),
    ];
    for (a, b, u, p) in cases {
        let r = mann_whitney(a, b).unwrap();
        assert_eq!(r.u, u);
        assert!((r.p - p).abs() < 1e-12, "{} vs {p}", r.p);
    }
}

#[test]
fn csv_rejects_bad_cells_and_headers() {
    let bad_header = "respondent,sex,i01\nr1,f,3\n";
    assert!(matches!(
        read_csv(bad_header.as_bytes()),
        Err(SurveyError::Csv { line: 1, .. })
    ));
    let header =
        "respondent,sex,i01,i02,i03,i04,i05,i06,i07,i08,i09,i10,i11,i12,i13,i14,i15,i16,i17,i18\n";
    let six = format!("{header}r1,f,6,3,3,3,3,3,3,3,3,3,3,3,3,3,3,3,3,3\n");
    assert!(matches!(
        read_csv(six.as_bytes()),
        Err(SurveyError::Csv { line: 2, .. })
    ));
    let sex = format!("{header}r1,x,3,3,3,3,3,3,3,3,3,3,3,3,3,3,3,3,3,3\n");
    assert!(read_csv(sex.as_bytes()).is_err());
}

#[test]
fn scores_csv_has_construct_columns() {
    let map = SubscaleMap::default();
    let m = recode(&matrix(vec![row([3; ITEM_COUNT])]), &map);
    let mut out = Vec::new();
    write_scores_csv(&mut out, &score(&m, &map), &map).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().ends_with("play_engrossment,overall"));
    assert_eq!(lines.next().unwrap(), "r,,3,3,3,3,3,3,3,3,3,27");
}

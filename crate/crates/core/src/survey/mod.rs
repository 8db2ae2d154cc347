//! GUESS-18 questionnaire scoring and the statistics reported with it.

mod stats;

use std::collections::BTreeSet;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use stats::{cronbach_alpha_columns, descriptive, mann_whitney, Descriptive, TestResult};

pub const ITEM_COUNT: usize = 18;
pub const CONSTRUCT_COUNT: usize = 9;

/// The built-in item map.
pub const DEFAULT_ITEM_MAP: &str = include_str!("guess18.json");

#[derive(Debug, Error, PartialEq)]
pub enum SurveyError {
    #[error("zero total variance: alpha is undefined")]
    Degenerate,
    #[error("both groups need at least one score")]
    EmptyGroup,
    #[error("need at least {need} complete rows, found {found}")]
    TooFewRows { need: usize, found: usize },
    #[error("need at least 2 items, found {0}")]
    TooFewItems(usize),
    #[error("csv line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("item map: {0}")]
    ItemMap(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    F,
    M,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Respondent {
    pub id: String,
    pub sex: Option<Sex>,
    /// Likert answers 1..=5 in item order; `None` is missing.
    pub items: [Option<u8>; ITEM_COUNT],
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyMatrix {
    pub rows: Vec<Respondent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Construct {
    pub name: String,
    pub label: String,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ItemMapFile {
    items: Vec<String>,
    constructs: Vec<Construct>,
    reverse_coded: Vec<String>,
}

/// Item columns per construct plus the reverse-coded columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubscaleMap {
    pub item_ids: Vec<String>,
    pub constructs: Vec<Construct>,
    /// Column indices per construct, parallel to `constructs`.
    pub columns: Vec<[usize; 2]>,
    pub reverse_coded: BTreeSet<usize>,
}

impl Default for SubscaleMap {
    fn default() -> Self {
        Self::from_json(DEFAULT_ITEM_MAP).expect("built-in item map is valid")
    }
}

impl SubscaleMap {
    pub fn from_json(text: &str) -> Result<Self, SurveyError> {
        let file: ItemMapFile =
            serde_json::from_str(text).map_err(|e| SurveyError::ItemMap(e.to_string()))?;
        if file.items.len() != ITEM_COUNT {
            return Err(SurveyError::ItemMap(format!(
                "expected {ITEM_COUNT} items, found {}",
                file.items.len()
            )));
        }
        if file.constructs.len() != CONSTRUCT_COUNT {
            return Err(SurveyError::ItemMap(format!(
                "expected {CONSTRUCT_COUNT} constructs, found {}",
                file.constructs.len()
            )));
        }
        let col = |id: &str| {
            file.items
                .iter()
                .position(|i| i == id)
                .ok_or_else(|| SurveyError::ItemMap(format!("unknown item \"{id}\"")))
        };
        let mut used = BTreeSet::new();
        let mut columns = Vec::new();
        for c in &file.constructs {
            let [a, b] = c.items.as_slice() else {
                return Err(SurveyError::ItemMap(format!(
                    "construct \"{}\" needs exactly 2 items",
                    c.name
                )));
            };
            let pair = [col(a)?, col(b)?];
            for i in pair {
                if !used.insert(i) {
                    return Err(SurveyError::ItemMap(format!(
                        "item \"{}\" is in more than one construct",
                        file.items[i]
                    )));
                }
            }
            columns.push(pair);
        }
        let reverse_coded = file
            .reverse_coded
            .iter()
            .map(|id| col(id))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            item_ids: file.items,
            constructs: file.constructs,
            columns,
            reverse_coded,
        })
    }
}

/// Reverse-codes `x → 6 − x` on the map's reverse-coded columns.
pub fn recode(m: &SurveyMatrix, map: &SubscaleMap) -> SurveyMatrix {
    let mut out = m.clone();
    for row in &mut out.rows {
        for &c in &map.reverse_coded {
            row.items[c] = row.items[c].map(|x| 6 - x);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub respondent: String,
    pub sex: Option<Sex>,
    /// Parallel to the map's constructs; missing when either item is missing.
    pub subscales: Vec<Option<f64>>,
    /// Sum of the nine subscales; missing when any subscale is.
    pub overall: Option<f64>,
}

/// Scores an already recoded matrix.
pub fn score(m: &SurveyMatrix, map: &SubscaleMap) -> Vec<Scores> {
    m.rows
        .iter()
        .map(|row| {
            let subscales: Vec<Option<f64>> = map
                .columns
                .iter()
                .map(|&[a, b]| match (row.items[a], row.items[b]) {
                    (Some(x), Some(y)) => Some((f64::from(x) + f64::from(y)) / 2.0),
                    _ => None,
                })
                .collect();
            let overall = subscales.iter().copied().sum::<Option<f64>>();
            Scores {
                respondent: row.id.clone(),
                sex: row.sex,
                subscales,
                overall,
            }
        })
        .collect()
}

/// Cronbach's alpha over the 18 item columns, dropping incomplete rows.
pub fn cronbach_alpha(m: &SurveyMatrix) -> Result<f64, SurveyError> {
    let complete: Vec<Vec<f64>> = m
        .rows
        .iter()
        .filter_map(|r| r.items.iter().map(|x| x.map(f64::from)).collect())
        .collect();
    cronbach_alpha_columns(&complete)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub items: Vec<Descriptive>,
    pub subscales: Vec<Descriptive>,
    pub overall: Descriptive,
}

/// Per-item, per-subscale and overall summaries of an already recoded
/// matrix; missing cells are skipped per column.
pub fn descriptives(m: &SurveyMatrix, map: &SubscaleMap) -> Descriptives {
    let items = (0..ITEM_COUNT)
        .map(|c| {
            let v: Vec<f64> = m
                .rows
                .iter()
                .filter_map(|r| r.items[c].map(f64::from))
                .collect();
            descriptive(&map.item_ids[c], &v)
        })
        .collect();
    let scores = score(m, map);
    let subscales = map
        .constructs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let v: Vec<f64> = scores.iter().filter_map(|s| s.subscales[k]).collect();
            descriptive(&c.name, &v)
        })
        .collect();
    let overall: Vec<f64> = scores.iter().filter_map(|s| s.overall).collect();
    Descriptives {
        items,
        subscales,
        overall: descriptive("overall", &overall),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SexComparison {
    pub scale: String,
    pub result: Option<TestResult>,
    /// Why no result was computed.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub respondents: usize,
    pub descriptives: Descriptives,
    pub alpha: Option<f64>,
    pub alpha_note: Option<String>,
    /// Group a is female, group b male: negative z means females rank lower.
    pub sex_differences: Vec<SexComparison>,
}

/// Recodes, then computes descriptives, alpha and per-scale sex comparisons.
pub fn report(raw: &SurveyMatrix, map: &SubscaleMap) -> Report {
    let m = recode(raw, map);
    let scores = score(&m, map);
    let (alpha, alpha_note) = match cronbach_alpha(&m) {
        Ok(a) => (Some(a), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let split = |pick: &dyn Fn(&Scores) -> Option<f64>| {
        let by = |sex: Sex| -> Vec<f64> {
            scores
                .iter()
                .filter(|s| s.sex == Some(sex))
                .filter_map(pick)
                .collect()
        };
        (by(Sex::F), by(Sex::M))
    };
    let compare = |scale: &str, (f, m): (Vec<f64>, Vec<f64>)| match mann_whitney(&f, &m) {
        Ok(r) => SexComparison {
            scale: scale.to_owned(),
            result: Some(r),
            skipped: None,
        },
        Err(e) => SexComparison {
            scale: scale.to_owned(),
            result: None,
            skipped: Some(e.to_string()),
        },
    };
    let mut sex_differences = vec![compare("overall", split(&|s: &Scores| s.overall))];
    for (k, c) in map.constructs.iter().enumerate() {
        sex_differences.push(compare(&c.name, split(&|s: &Scores| s.subscales[k])));
    }
    Report {
        respondents: m.rows.len(),
        descriptives: descriptives(&m, map),
        alpha,
        alpha_note,
        sex_differences,
    }
}

/// Reads `respondent,sex,i01..i18` CSV. Cells are 1..=5 or empty; sex is
/// `f`, `m` or empty (case-insensitive).
pub fn read_csv<R: Read>(input: R) -> Result<SurveyMatrix, SurveyError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers().map_err(|e| SurveyError::Csv {
        line: 1,
        message: e.to_string(),
    })?;
    let expected: Vec<String> = ["respondent", "sex"]
        .into_iter()
        .map(str::to_owned)
        .chain((1..=ITEM_COUNT).map(|i| format!("i{i:02}")))
        .collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(SurveyError::Csv {
            line: 1,
            message: format!("header must be {}", expected.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| SurveyError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| SurveyError::Csv { line, message };
        let sex = match rec[1].to_ascii_lowercase().as_str() {
            "" => None,
            "f" => Some(Sex::F),
            "m" => Some(Sex::M),
            other => return Err(bad(format!("sex must be f, m or empty, not \"{other}\""))),
        };
        let mut items = [None; ITEM_COUNT];
        for (i, cell) in items.iter_mut().enumerate() {
            let raw = &rec[i + 2];
            if raw.is_empty() {
                continue;
            }
            match raw.parse::<u8>() {
                Ok(x @ 1..=5) => *cell = Some(x),
                _ => {
                    return Err(bad(format!(
                        "i{:02} must be 1..5 or empty, not \"{raw}\"",
                        i + 1
                    )))
                }
            }
        }
        rows.push(Respondent {
            id: rec[0].to_owned(),
            sex,
            items,
        });
    }
    Ok(SurveyMatrix { rows })
}

/// Writes per-respondent scores as CSV: respondent, sex, the nine construct
/// names, overall. Missing values are empty cells.
pub fn write_scores_csv<W: std::io::Write>(
    out: W,
    scores: &[Scores],
    map: &SubscaleMap,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["respondent".to_owned(), "sex".to_owned()];
    header.extend(map.constructs.iter().map(|c| c.name.clone()));
    header.push("overall".into());
    w.write_record(&header)?;
    let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for s in scores {
        let mut rec = vec![
            s.respondent.clone(),
            match s.sex {
                Some(Sex::F) => "f".into(),
                Some(Sex::M) => "m".into(),
                None => String::new(),
            },
        ];
        rec.extend(s.subscales.iter().map(|&x| fmt(x)));
        rec.push(fmt(s.overall));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;

use libm::erfc;
use serde::{Deserialize, Serialize};

use super::SurveyError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub label: String,
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; undefined below two values.
    pub sd: Option<f64>,
    pub variance: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance with the n−1 denominator.
fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

pub fn descriptive(label: &str, v: &[f64]) -> Descriptive {
    let n = v.len();
    let variance = (n >= 2).then(|| sample_variance(v));
    Descriptive {
        label: label.to_owned(),
        n,
        mean: (n > 0).then(|| mean(v)),
        sd: variance.map(f64::sqrt),
        variance,
        min: v.iter().copied().reduce(f64::min),
        max: v.iter().copied().reduce(f64::max),
    }
}

/// Cronbach's alpha of complete `rows`, each holding one value per item.
pub fn cronbach_alpha_columns(rows: &[Vec<f64>]) -> Result<f64, SurveyError> {
    let k = rows.first().map_or(0, Vec::len);
    if k < 2 {
        return Err(SurveyError::TooFewItems(k));
    }
    if rows.len() < 2 {
        return Err(SurveyError::TooFewRows {
            need: 2,
            found: rows.len(),
        });
    }
    assert!(rows.iter().all(|r| r.len() == k), "ragged matrix");
    let item_var: f64 = (0..k)
        .map(|j| sample_variance(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .sum();
    let totals: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let total_var = sample_variance(&totals);
    if total_var == 0.0 {
        return Err(SurveyError::Degenerate);
    }
    let k = k as f64;
    Ok(k / (k - 1.0) * (1.0 - item_var / total_var))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// U of group a: pairs with a above b, ties counting one half.
    pub u: f64,
    /// Normal approximation; negative when group a ranks lower.
    pub z: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Mann-Whitney U test with midranks and tie-corrected normal approximation
/// (no continuity correction).
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<TestResult, SurveyError> {
    if a.is_empty() || b.is_empty() {
        return Err(SurveyError::EmptyGroup);
    }
    let (n1, n2) = (a.len(), b.len());
    let mut all: Vec<(f64, bool)> = a
        .iter()
        .map(|&x| (x, true))
        .chain(b.iter().map(|&x| (x, false)))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = all.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // Ranks i+1..=j+1 share their midrank.
        let midrank = (i + j + 2) as f64 / 2.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += midrank * all[i..=j].iter().filter(|e| e.1).count() as f64;
        i = j + 1;
    }
    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let u = rank_sum_a - n1f * (n1f + 1.0) / 2.0;
    let variance = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let (z, p) = if variance > 0.0 {
        let z = (u - n1f * n2f / 2.0) / variance.sqrt();
        (z, erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
    } else {
        (0.0, 1.0)
    };
    Ok(TestResult {
        u,
        z,
        p,
        n_a: n1,
        n_b: n2,
    })
}

//! Originality, elaboration, flexibility and the combined creativity score.
//!
//! Raw scores are per project. Every normalized score divides by the studio
//! maximum of that score, so the top project of each dimension gets exactly
//! 1.0 and a studio where every raw value is 0 normalizes to all zeros. The
//! combined score is the sum of the three normalized dimensions, normalized
//! the same way.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::competition_ranks;
use crate::model::{Category, Element, ElementBag, StudioIndex};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("element {0} is not in the studio index")]
    UnknownElement(String),
}

/// `1 / df(e)`: the reciprocal of the number of studio projects using `e`.
pub fn uniqueness(element: &Element, index: &StudioIndex) -> Result<f64, MetricsError> {
    match index.df(element) {
        Some(df) if df > 0 => Ok(1.0 / df as f64),
        _ => Err(MetricsError::UnknownElement(element.to_string())),
    }
}

/// Sum of uniqueness over the project's distinct elements.
pub fn originality_raw(bag: &ElementBag, index: &StudioIndex) -> Result<f64, MetricsError> {
    bag.distinct().map(|e| uniqueness(e, index)).sum()
}

/// Occurrences of all seven categories, plus script count and max depth.
pub fn elaboration_raw(bag: &ElementBag) -> f64 {
    let occurrences: u64 = Category::ALL.iter().map(|&c| bag.occurrences(c)).sum();
    (occurrences + bag.script_count as u64 + bag.max_depth as u64) as f64
}

pub fn flexibility_raw(textual: usize, visual: usize) -> f64 {
    (textual + visual) as f64
}

/// Divides by the maximum. All zeros stay zeros.
pub fn normalize_scores(raw: &[f64]) -> Vec<f64> {
    let max = raw.iter().copied().fold(0.0_f64, f64::max);
    if max > 0.0 {
        raw.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

/// Studio CCS vector from the normalized dimension vectors.
pub fn combined_creativity(originality: &[f64], elaboration: &[f64], flexibility: &[f64]) -> Vec<f64> {
    assert!(
        originality.len() == elaboration.len() && elaboration.len() == flexibility.len(),
        "dimension vectors must have equal length"
    );
    let sums: Vec<f64> = originality
        .iter()
        .zip(elaboration)
        .zip(flexibility)
        .map(|((o, e), f)| o + e + f)
        .collect();
    normalize_scores(&sums)
}

/// Un-normalized scores of one project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    pub project_id: String,
    pub originality_raw: f64,
    pub elaboration_raw: f64,
    pub textual_flex: usize,
    pub visual_flex: usize,
    pub flexibility_raw: f64,
}

impl RawScores {
    pub fn new(
        project_id: impl Into<String>,
        originality_raw: f64,
        elaboration_raw: f64,
        textual_flex: usize,
        visual_flex: usize,
    ) -> Self {
        RawScores {
            project_id: project_id.into(),
            originality_raw,
            elaboration_raw,
            textual_flex,
            visual_flex,
            flexibility_raw: flexibility_raw(textual_flex, visual_flex),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub project_id: String,
    pub originality_raw: f64,
    pub elaboration_raw: f64,
    pub textual_flex: usize,
    pub visual_flex: usize,
    pub flexibility_raw: f64,
    pub originality: f64,
    pub elaboration: f64,
    pub flexibility: f64,
    pub ccs: f64,
    pub rank_ccs: usize,
}

/// Normalizes and ranks a studio. Cards come back in input order.
pub fn score_cards(raws: &[RawScores]) -> Vec<ScoreCard> {
    let column = |f: fn(&RawScores) -> f64| -> Vec<f64> {
        normalize_scores(&raws.iter().map(f).collect::<Vec<_>>())
    };
    let o = column(|r| r.originality_raw);
    let e = column(|r| r.elaboration_raw);
    let f = column(|r| r.flexibility_raw);
    let ccs = combined_creativity(&o, &e, &f);
    let ranks = competition_ranks(&ccs);

    raws.iter()
        .enumerate()
        .map(|(i, r)| ScoreCard {
            project_id: r.project_id.clone(),
            originality_raw: r.originality_raw,
            elaboration_raw: r.elaboration_raw,
            textual_flex: r.textual_flex,
            visual_flex: r.visual_flex,
            flexibility_raw: r.flexibility_raw,
            originality: o[i],
            elaboration: e[i],
            flexibility: f[i],
            ccs: ccs[i],
            rank_ccs: ranks[i],
        })
        .collect()
}

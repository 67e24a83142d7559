//! Ranking, Kendall rank correlation, and cross-metric comparison tables.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::ScoreCard;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("paired inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("all values of one input are equal; tau is undefined")]
    DegenerateInput,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("only {0} projects are scored by both metrics; need at least 2")]
    InsufficientOverlap(usize),
    #[error("external scores: {0}")]
    ExternalScores(String),
}

/// Scores of another metric (e.g. a computational-thinking score) for the
/// same projects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalScores {
    pub metric_name: String,
    pub scores: BTreeMap<String, f64>,
}

impl ExternalScores {
    /// Reads a `project_id,score` CSV.
    pub fn from_csv_path(path: &Path, metric_name: &str) -> Result<Self, AnalysisError> {
        let file = std::fs::File::open(path)
            .map_err(|e| AnalysisError::ExternalScores(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file, metric_name)
    }

    pub fn from_csv_reader<R: std::io::Read>(
        reader: R,
        metric_name: &str,
    ) -> Result<Self, AnalysisError> {
        let bad = |m: String| AnalysisError::ExternalScores(m);
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if headers.len() < 2 || &headers[0] != "project_id" || &headers[1] != "score" {
            return Err(bad(format!(
                "expected header project_id,score, found {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut scores = BTreeMap::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            let id = record.get(0).unwrap_or_default().to_string();
            let raw = record.get(1).unwrap_or_default();
            let score: f64 = raw
                .parse()
                .map_err(|_| bad(format!("row {}: invalid score {raw:?}", line + 2)))?;
            if !score.is_finite() {
                return Err(bad(format!("row {}: non-finite score", line + 2)));
            }
            if scores.insert(id.clone(), score).is_some() {
                return Err(bad(format!("duplicate project id {id}")));
            }
        }
        Ok(ExternalScores {
            metric_name: metric_name.to_string(),
            scores,
        })
    }
}

/// Competition ranks ("1224") for descending scores.
pub fn competition_ranks(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = if pos > 0 && scores[order[pos - 1]] == scores[i] {
            ranks[order[pos - 1]]
        } else {
            pos + 1
        };
    }
    ranks
}

/// Competition ranking of a score map, highest score first.
pub fn rank_projects(scores: &BTreeMap<String, f64>) -> BTreeMap<String, usize> {
    let values: Vec<f64> = scores.values().copied().collect();
    scores
        .keys()
        .cloned()
        .zip(competition_ranks(&values))
        .collect()
}

/// Projects in display order: rank ascending, then project id.
pub fn display_order(ranks: &BTreeMap<String, usize>) -> Vec<(&str, usize)> {
    let mut rows: Vec<(&str, usize)> = ranks.iter().map(|(id, r)| (id.as_str(), *r)).collect();
    rows.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KendallResult {
    pub tau: f64,
    /// Two-sided, from the normal approximation.
    pub p_value: f64,
    /// Concordant minus discordant pairs.
    pub s: f64,
    pub n: usize,
}

/// Counts inversions of `v` while merge-sorting it.
fn sort_counting_swaps(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mut swaps = 0u64;
    let mut buf = v.to_vec();
    let mut width = 1;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid && j < end {
                if v[j] < v[i] {
                    buf[k] = v[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    buf[k] = v[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
            k += mid - i;
            buf[k..k + (end - j)].copy_from_slice(&v[j..end]);
            start = end;
        }
        v.copy_from_slice(&buf);
        width *= 2;
    }
    swaps
}

/// Sizes of runs of equal values in a sorted slice (runs of length ≥ 2).
fn tie_groups(sorted: &[f64]) -> Vec<u64> {
    let mut groups = Vec::new();
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            if run > 1 {
                groups.push(run);
            }
            run = 1;
        }
    }
    if run > 1 {
        groups.push(run);
    }
    groups
}

/// Kendall's τ-b with tie correction, computed in O(n log n) by counting
/// merge-sort exchanges.
///
/// The p-value uses the tie-corrected variance of S = C − D and a two-sided
/// normal tail.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<KendallResult, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(AnalysisError::TooFewPairs(n));
    }
    if let Some(i) = x.iter().zip(y).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(AnalysisError::NonFinite(i));
    }

    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let pairs_of = |t: u64| t * (t - 1) / 2;
    let n0 = pairs_of(n as u64);

    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let x_ties = tie_groups(&xs);
    let n1: u64 = x_ties.iter().map(|&t| pairs_of(t)).sum();

    // Joint ties: runs equal in both coordinates.
    let mut n3 = 0u64;
    let mut run = 1u64;
    for w in pairs.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            n3 += pairs_of(run);
            run = 1;
        }
    }
    n3 += pairs_of(run);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = sort_counting_swaps(&mut ys);
    let y_ties = tie_groups(&ys);
    let n2: u64 = y_ties.iter().map(|&t| pairs_of(t)).sum();

    if n1 == n0 || n2 == n0 {
        return Err(AnalysisError::DegenerateInput);
    }

    let s = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    // One rounding step: exact whenever the product is a perfect square.
    let denom = ((u128::from(n0 - n1) * u128::from(n0 - n2)) as f64).sqrt();
    let tau = (s / denom).clamp(-1.0, 1.0);

    let nf = n as f64;
    let sum3 = |g: &[u64], f: &dyn Fn(f64) -> f64| g.iter().map(|&t| f(t as f64)).sum::<f64>();
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt = sum3(&x_ties, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum3(&y_ties, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = sum3(&x_ties, &|t| t * (t - 1.0)) * sum3(&y_ties, &|t| t * (t - 1.0))
        / (2.0 * nf * (nf - 1.0));
    let v2 = if n > 2 {
        sum3(&x_ties, &|t| t * (t - 1.0) * (t - 2.0)) * sum3(&y_ties, &|t| t * (t - 1.0) * (t - 2.0))
            / (9.0 * nf * (nf - 1.0) * (nf - 2.0))
    } else {
        0.0
    };
    let var_s = (v0 - vt - vu) / 18.0 + v1 + v2;
    let p_value = if var_s > 0.0 {
        let z = s.abs() / var_s.sqrt();
        statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
    } else {
        1.0
    };

    Ok(KendallResult { tau, p_value, s, n })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossRankRow {
    pub rank: usize,
    pub project_id: String,
    pub other_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disagreement {
    pub project_id: String,
    pub rank_a: usize,
    pub rank_b: usize,
    pub delta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metric_a: String,
    pub metric_b: String,
    pub tau: f64,
    pub p_value: f64,
    /// Set when n < 10, where the normal approximation is rough.
    pub p_value_approximate: bool,
    pub n: usize,
    pub top_k_a: Vec<CrossRankRow>,
    pub top_k_b: Vec<CrossRankRow>,
    pub disagreements: Vec<Disagreement>,
    pub missing_in_a: Vec<String>,
    pub missing_in_b: Vec<String>,
}

fn top_k(ranks: &BTreeMap<String, usize>, other: &BTreeMap<String, usize>, k: usize) -> Vec<CrossRankRow> {
    display_order(ranks)
        .into_iter()
        .take(k)
        .map(|(id, rank)| CrossRankRow {
            rank,
            project_id: id.to_string(),
            other_rank: other[id],
        })
        .collect()
}

/// Compares two scorings over the projects both of them cover. Ranks are
/// recomputed within that intersection.
pub fn compare_score_maps(
    metric_a: &str,
    a: &BTreeMap<String, f64>,
    metric_b: &str,
    b: &BTreeMap<String, f64>,
    k: usize,
) -> Result<ComparisonReport, AnalysisError> {
    let common: BTreeSet<&String> = a.keys().filter(|id| b.contains_key(*id)).collect();
    if common.len() < 2 {
        return Err(AnalysisError::InsufficientOverlap(common.len()));
    }
    let sub = |m: &BTreeMap<String, f64>| -> BTreeMap<String, f64> {
        common.iter().map(|id| ((*id).clone(), m[*id])).collect()
    };
    let (sa, sb) = (sub(a), sub(b));
    let xs: Vec<f64> = sa.values().copied().collect();
    let ys: Vec<f64> = sb.values().copied().collect();
    let kendall = kendall_tau_b(&xs, &ys)?;

    let ra = rank_projects(&sa);
    let rb = rank_projects(&sb);

    let mut disagreements: Vec<Disagreement> = ra
        .iter()
        .map(|(id, &rank_a)| {
            let rank_b = rb[id];
            Disagreement {
                project_id: id.clone(),
                rank_a,
                rank_b,
                delta: rank_a.abs_diff(rank_b),
            }
        })
        .filter(|d| d.delta > 0)
        .collect();
    disagreements.sort_by(|x, y| match y.delta.cmp(&x.delta) {
        Ordering::Equal => x.project_id.cmp(&y.project_id),
        other => other,
    });
    disagreements.truncate(k);

    let missing = |m: &BTreeMap<String, f64>, other: &BTreeMap<String, f64>| -> Vec<String> {
        other.keys().filter(|id| !m.contains_key(*id)).cloned().collect()
    };

    Ok(ComparisonReport {
        metric_a: metric_a.to_string(),
        metric_b: metric_b.to_string(),
        tau: kendall.tau,
        p_value: kendall.p_value,
        p_value_approximate: kendall.n < 10,
        n: kendall.n,
        top_k_a: top_k(&ra, &rb, k),
        top_k_b: top_k(&rb, &ra, k),
        disagreements,
        missing_in_a: missing(a, b),
        missing_in_b: missing(b, a),
    })
}

/// Compares CCS against an external metric.
pub fn compare_rankings(
    cards: &[ScoreCard],
    external: &ExternalScores,
    k: usize,
) -> Result<ComparisonReport, AnalysisError> {
    let ccs: BTreeMap<String, f64> = cards.iter().map(|c| (c.project_id.clone(), c.ccs)).collect();
    compare_score_maps("CCS", &ccs, &external.metric_name, &external.scores, k)
}

impl ComparisonReport {
    /// Plain-text rendering: one top-k table per metric with the other
    /// metric's rank alongside, then τ and p.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let mut table = |title: &str, own: &str, other: &str, rows: &[CrossRankRow]| {
            let _ = writeln!(out, "Top ranked by {title}");
            let _ = writeln!(out, "{:>6}  {:<14}  {:>8}", own, "project_id", other);
            for row in rows {
                let _ = writeln!(out, "{:>6}  {:<14}  {:>8}", row.rank, row.project_id, row.other_rank);
            }
            out.push('\n');
        };
        table(&self.metric_a, &self.metric_a, &self.metric_b, &self.top_k_a);
        table(&self.metric_b, &self.metric_b, &self.metric_a, &self.top_k_b);
        let _ = writeln!(
            out,
            "Kendall tau-b = {:.3}  p = {:.3e}  n = {}{}",
            self.tau,
            self.p_value,
            self.n,
            if self.p_value_approximate { "  (p approximate, n < 10)" } else { "" }
        );
        if !self.missing_in_a.is_empty() || !self.missing_in_b.is_empty() {
            let _ = writeln!(
                out,
                "not compared: {} missing from {}, {} missing from {}",
                self.missing_in_a.len(),
                self.metric_a,
                self.missing_in_b.len(),
                self.metric_b
            );
        }
        out
    }
}

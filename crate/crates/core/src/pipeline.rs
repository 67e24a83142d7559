//! End-to-end studio scoring and the files it writes.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{compare_rankings, AnalysisError, ComparisonReport, ExternalScores};
use crate::flexibility::{
    embed_builtin, extract_text_documents, extract_text_element_documents, import_embeddings,
    studio_textual_flexibility, studio_visual_flexibility, ClusterAssignment, EmbeddingBackend,
    FlexError, ImageRecord, TextDocument, TextGranularity,
};
use crate::ingest::{load_local_studio, IngestError, LoadFailure, RawProject};
use crate::metrics::{elaboration_raw, originality_raw, score_cards, MetricsError, RawScores, ScoreCard};
use crate::model::{
    build_studio_index, extract_elements, extract_scripts, parse_project, Diagnostics, ModelError,
    Project,
};

pub const SCORES_JSON: &str = "scores.json";
pub const SCORES_CSV: &str = "scores.csv";
pub const CLUSTERS_JSON: &str = "clusters.json";
pub const DIAGNOSTICS_JSON: &str = "diagnostics.json";
pub const COMPARISON_JSON: &str = "comparison.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Flex(#[from] FlexError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("no project in the studio could be parsed")]
    NothingToScore,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Where image embeddings come from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum EmbeddingSource {
    #[default]
    Builtin,
    /// CSV of precomputed vectors.
    Import(PathBuf),
}

impl std::str::FromStr for EmbeddingSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "builtin" => Ok(EmbeddingSource::Builtin),
            _ => match s.strip_prefix("import:") {
                Some(path) if !path.is_empty() => Ok(EmbeddingSource::Import(PathBuf::from(path))),
                _ => Err(format!("invalid embedding {s:?} (builtin|import:PATH)")),
            },
        }
    }
}

impl std::fmt::Display for EmbeddingSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EmbeddingSource::Builtin => f.write_str("builtin"),
            EmbeddingSource::Import(p) => write!(f, "import:{}", p.display()),
        }
    }
}

impl Serialize for EmbeddingSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EmbeddingSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreOptions {
    pub seed: u64,
    /// `None` picks k from the number of images.
    pub k_visual: Option<usize>,
    pub k_text: Option<usize>,
    pub embedding: EmbeddingSource,
    pub text_granularity: TextGranularity,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            seed: 42,
            k_visual: None,
            k_text: None,
            embedding: EmbeddingSource::Builtin,
            text_granularity: TextGranularity::default(),
        }
    }
}

/// Run parameters stamped into every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// Effective k; `None` when there was nothing to cluster.
    pub k_visual: Option<usize>,
    pub k_text: Option<usize>,
    pub embedding: EmbeddingBackend,
    pub text_granularity: TextGranularity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clustering {
    pub modality: String,
    #[serde(flatten)]
    pub clusters: ClusterAssignment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudioScores {
    pub meta: Meta,
    /// Sorted by project id.
    pub cards: Vec<ScoreCard>,
    pub clusterings: Vec<Clustering>,
    pub diagnostics: Vec<Diagnostics>,
    /// Projects that could not be loaded or parsed.
    pub failures: Vec<LoadFailure>,
}

/// Distinct decodable costumes of a project, in target order. Missing or
/// undecodable assets are logged and skipped.
pub fn project_images(raw: &RawProject, project: &Project) -> Vec<ImageRecord> {
    use rayon::prelude::*;
    let mut seen = BTreeSet::new();
    let names: Vec<&str> = project
        .targets
        .iter()
        .flat_map(|t| &t.costumes)
        .map(|c| c.md5ext.as_str())
        .filter(|name| !name.is_empty() && seen.insert(*name))
        .collect();
    names
        .par_iter()
        .filter_map(|name| {
            let Some(bytes) = raw.asset(name) else {
                log::warn!("{}: costume asset {name} is missing", raw.project_id);
                return None;
            };
            match ImageRecord::decode(&raw.project_id, name, bytes) {
                Ok(img) => Some(img),
                Err(e) => {
                    log::warn!("skipping image: {e}");
                    None
                }
            }
        })
        .collect()
}

fn text_documents(project: &Project, granularity: TextGranularity) -> Vec<TextDocument> {
    match granularity {
        TextGranularity::Element => extract_text_element_documents(project),
        TextGranularity::Project => vec![extract_text_documents(project)],
    }
}

/// Scores already loaded projects. Parse failures are recorded, not fatal.
pub fn score_projects(
    raws: &[RawProject],
    mut failures: Vec<LoadFailure>,
    opts: &ScoreOptions,
) -> Result<StudioScores, PipelineError> {
    use rayon::prelude::*;

    let parsed: Vec<Result<Project, ModelError>> = raws.par_iter().map(parse_project).collect();
    let mut projects = Vec::new();
    let mut sources = Vec::new();
    for (raw, result) in raws.iter().zip(parsed) {
        match result {
            Ok(p) => {
                projects.push(p);
                sources.push(raw);
            }
            Err(e) => failures.push(LoadFailure {
                source: raw.project_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    if projects.is_empty() {
        return Err(PipelineError::NothingToScore);
    }

    let diagnostics: Vec<Diagnostics> = projects
        .par_iter()
        .map(|p| Diagnostics::of(p, &extract_scripts(p)))
        .collect();
    let bags: Vec<_> = projects.par_iter().map(extract_elements).collect();
    let index = build_studio_index(&bags)?;
    let ids: Vec<String> = projects.iter().map(|p| p.project_id.clone()).collect();

    let images: Vec<ImageRecord> = sources
        .iter()
        .zip(&projects)
        .flat_map(|(raw, p)| project_images(raw, p))
        .collect();
    let embeddings = match &opts.embedding {
        EmbeddingSource::Builtin => embed_builtin(&images),
        EmbeddingSource::Import(path) => import_embeddings(path, &images)?,
    };
    let visual = studio_visual_flexibility(&ids, &images, &embeddings, opts.k_visual, opts.seed)?;

    let docs: Vec<Vec<TextDocument>> = projects
        .iter()
        .map(|p| text_documents(p, opts.text_granularity))
        .collect();
    let textual = studio_textual_flexibility(&ids, &docs, opts.k_text, opts.seed)?;

    let raw_scores = bags
        .iter()
        .enumerate()
        .map(|(i, bag)| {
            Ok(RawScores::new(
                bag.project_id.clone(),
                originality_raw(bag, &index)?,
                elaboration_raw(bag),
                textual.counts[i],
                visual.counts[i],
            ))
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    let mut cards = score_cards(&raw_scores);
    cards.sort_by(|a, b| a.project_id.cmp(&b.project_id));

    let meta = Meta {
        tool: "ccs".into(),
        version: crate::VERSION.into(),
        seed: opts.seed,
        k_visual: visual.clusters.as_ref().map(|c| c.k),
        k_text: textual.clusters.as_ref().map(|c| c.k),
        embedding: embeddings.backend,
        text_granularity: opts.text_granularity,
    };
    let clusterings = [("visual", visual.clusters), ("textual", textual.clusters)]
        .into_iter()
        .filter_map(|(modality, c)| {
            c.map(|clusters| Clustering {
                modality: modality.into(),
                clusters,
            })
        })
        .collect();
    failures.sort_by(|a, b| a.source.cmp(&b.source));

    Ok(StudioScores {
        meta,
        cards,
        clusterings,
        diagnostics,
        failures,
    })
}

/// Loads and scores every project in `studio_dir`.
pub fn score_studio(studio_dir: &Path, opts: &ScoreOptions) -> Result<StudioScores, PipelineError> {
    let studio = load_local_studio(studio_dir)?;
    for failure in &studio.failures {
        log::warn!("{}: {}", failure.source, failure.error);
    }
    score_projects(&studio.projects, studio.failures, opts)
}

#[derive(Serialize)]
struct ScoresFile<'a> {
    meta: &'a Meta,
    scores: &'a [ScoreCard],
}

#[derive(Serialize)]
struct ClustersFile<'a> {
    meta: &'a Meta,
    clusterings: &'a [Clustering],
}

#[derive(Serialize)]
struct DiagnosticsFile<'a> {
    meta: &'a Meta,
    projects: &'a [Diagnostics],
    failures: &'a [LoadFailure],
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// `scores.csv` rows ordered by rank, then project id.
pub fn scores_csv(cards: &[ScoreCard]) -> String {
    let mut sorted: Vec<&ScoreCard> = cards.iter().collect();
    sorted.sort_by(|a, b| (a.rank_ccs, &a.project_id).cmp(&(b.rank_ccs, &b.project_id)));
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "project_id", "O_raw", "E_raw", "Tf", "Vf", "F_raw", "O", "E", "F", "CCS", "rank",
    ];
    // Writing into a Vec cannot fail.
    w.write_record(header).expect("in-memory csv");
    for c in sorted {
        w.write_record([
            c.project_id.clone(),
            c.originality_raw.to_string(),
            c.elaboration_raw.to_string(),
            c.textual_flex.to_string(),
            c.visual_flex.to_string(),
            c.flexibility_raw.to_string(),
            c.originality.to_string(),
            c.elaboration.to_string(),
            c.flexibility.to_string(),
            c.ccs.to_string(),
            c.rank_ccs.to_string(),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv output is UTF-8")
}

/// Writes scores.json, scores.csv, clusters.json and diagnostics.json.
pub fn write_outputs(out_dir: &Path, scores: &StudioScores) -> Result<(), PipelineError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_json(
        &out_dir.join(SCORES_JSON),
        &ScoresFile {
            meta: &scores.meta,
            scores: &scores.cards,
        },
    )?;
    let csv_path = out_dir.join(SCORES_CSV);
    fs::write(&csv_path, scores_csv(&scores.cards)).map_err(io_err(&csv_path))?;
    write_json(
        &out_dir.join(CLUSTERS_JSON),
        &ClustersFile {
            meta: &scores.meta,
            clusterings: &scores.clusterings,
        },
    )?;
    write_json(
        &out_dir.join(DIAGNOSTICS_JSON),
        &DiagnosticsFile {
            meta: &scores.meta,
            projects: &scores.diagnostics,
            failures: &scores.failures,
        },
    )
}

/// Reads score cards from a `scores.json`, either the `{meta, scores}`
/// object this tool writes or a bare array of cards.
pub fn read_score_cards(path: &Path) -> Result<Vec<ScoreCard>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let format = |message: String| PipelineError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format(e.to_string()))?;
    let cards = match value.get_mut("scores") {
        Some(scores) => scores.take(),
        None => value,
    };
    serde_json::from_value(cards).map_err(|e| format(e.to_string()))
}

#[derive(Serialize)]
struct ComparisonFile<'a> {
    meta: ComparisonMeta<'a>,
    #[serde(flatten)]
    report: &'a ComparisonReport,
}

#[derive(Serialize)]
struct ComparisonMeta<'a> {
    tool: &'a str,
    version: &'a str,
    top_k: usize,
}

/// Compares the cards of `scores_path` with an external CSV.
pub fn compare_files(
    scores_path: &Path,
    external_path: &Path,
    metric_name: &str,
    top_k: usize,
) -> Result<ComparisonReport, PipelineError> {
    let cards = read_score_cards(scores_path)?;
    let external = ExternalScores::from_csv_path(external_path, metric_name)?;
    Ok(compare_rankings(&cards, &external, top_k)?)
}

pub fn write_comparison(path: &Path, report: &ComparisonReport, top_k: usize) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    write_json(
        path,
        &ComparisonFile {
            meta: ComparisonMeta {
                tool: "ccs",
                version: crate::VERSION,
                top_k,
            },
            report,
        },
    )
}

//! Text pulled from projects (speech, questions, messages) and its TF-IDF
//! representation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::FlexError;
use crate::model::{InputValue, LiteralKind, Project};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TextDocument {
    pub project_id: String,
    pub tokens: Vec<String>,
}

/// How project text is split into clustered documents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextGranularity {
    /// Each distinct text element is its own document.
    #[default]
    Element,
    /// All of a project's text is one document.
    Project,
}

impl std::str::FromStr for TextGranularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "element" => Ok(TextGranularity::Element),
            "project" => Ok(TextGranularity::Project),
            other => Err(format!("unknown text granularity {other:?} (element|project)")),
        }
    }
}

impl std::fmt::Display for TextGranularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TextGranularity::Element => "element",
            TextGranularity::Project => "project",
        })
    }
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Raw text elements of a project: free-text literals (what sprites say,
/// think and ask) and broadcast message names, in target/block/slot order.
pub fn text_elements(project: &Project) -> Vec<String> {
    let mut out = Vec::new();
    for target in &project.targets {
        for block in target.blocks.values() {
            for input in block.inputs.values() {
                if let InputValue::Literal(lit) = &input.value {
                    if matches!(lit.kind, LiteralKind::Text | LiteralKind::Broadcast) {
                        out.push(lit.value.clone());
                    }
                }
            }
            if let Some(name) = block.fields.get("BROADCAST_OPTION") {
                out.push(name.clone());
            }
        }
    }
    out
}

/// All of a project's text as one document.
pub fn extract_text_documents(project: &Project) -> TextDocument {
    TextDocument {
        project_id: project.project_id.clone(),
        tokens: text_elements(project).iter().flat_map(|t| tokenize(t)).collect(),
    }
}

/// One document per distinct, non-empty text element.
pub fn extract_text_element_documents(project: &Project) -> Vec<TextDocument> {
    let mut seen = BTreeSet::new();
    text_elements(project)
        .iter()
        .map(|t| tokenize(t))
        .filter(|tokens| !tokens.is_empty() && seen.insert(tokens.clone()))
        .map(|tokens| TextDocument {
            project_id: project.project_id.clone(),
            tokens,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfIdf {
    /// Sorted distinct tokens; index `i` is vector component `i`.
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// TF-IDF with raw counts and smoothed idf:
/// `w(t, d) = tf(t, d) * (ln((1 + N) / (1 + df(t))) + 1)`, each non-zero
/// vector scaled to unit L2 norm. Empty documents map to zero vectors.
pub fn tfidf_vectorize(docs: &[TextDocument]) -> Result<TfIdf, FlexError> {
    let vocabulary: Vec<String> = docs
        .iter()
        .flat_map(|d| d.tokens.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocabulary.is_empty() {
        return Err(FlexError::EmptyCorpus);
    }
    let position: BTreeMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let mut df = vec![0usize; vocabulary.len()];
    let counts: Vec<BTreeMap<usize, usize>> = docs
        .iter()
        .map(|d| {
            let mut tf = BTreeMap::new();
            for t in &d.tokens {
                *tf.entry(position[t.as_str()]).or_insert(0) += 1;
            }
            for &i in tf.keys() {
                df[i] += 1;
            }
            tf
        })
        .collect();

    let n = docs.len() as f64;
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
        .collect();

    let vectors = counts
        .iter()
        .map(|tf| {
            let mut v = vec![0.0; vocabulary.len()];
            for (&i, &c) in tf {
                v[i] = c as f64 * idf[i];
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            v
        })
        .collect();

    Ok(TfIdf {
        vocabulary,
        idf,
        vectors,
    })
}

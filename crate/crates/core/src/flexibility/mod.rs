//! Visual and textual flexibility.
//!
//! All images of a studio are embedded and clustered together; a project's
//! visual flexibility is the number of distinct clusters its images land in.
//! Textual flexibility does the same over TF-IDF vectors of the project's
//! text.

mod embed;
mod kmeans;
mod text;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use embed::{
    embed_builtin, embed_image_builtin, import_embeddings, import_embeddings_from, EmbeddingBackend,
    EmbeddingSet, ImageRecord, BUILTIN_DIM, HISTOGRAM_BINS, THUMBNAIL_SIDE,
};
pub use kmeans::{
    cluster_items, default_k, kmeans, kmeans_with, squared_distance, ClusterAssignment, KMeansFit,
    KMeansParams, DEFAULT_MAX_ITER, DEFAULT_RESTARTS,
};
pub use text::{
    extract_text_documents, extract_text_element_documents, text_elements, tfidf_vectorize,
    tokenize, TextDocument, TextGranularity, TfIdf,
};

#[derive(Debug, Error)]
pub enum FlexError {
    #[error("cannot decode image {image}: {reason}")]
    Decode { image: String, reason: String },
    #[error("no embedding for image {0}")]
    MissingEmbedding(String),
    #[error("embedding for {image} has {found} components, expected {expected}")]
    DimensionMismatch {
        image: String,
        expected: usize,
        found: usize,
    },
    #[error("non-finite embedding value for {0}")]
    NonFiniteValue(String),
    #[error("embedding import: {0}")]
    Import(String),
    #[error("k = {k} is out of range for {n} items")]
    BadK { k: usize, n: usize },
    #[error("no document has any token")]
    EmptyCorpus,
}

/// Number of distinct clusters among `items`. Items missing from the
/// clustering are ignored.
pub fn distinct_clusters<'a>(
    items: impl IntoIterator<Item = &'a str>,
    clusters: &ClusterAssignment,
) -> usize {
    items
        .into_iter()
        .filter_map(|id| clusters.cluster_of(id))
        .collect::<BTreeSet<_>>()
        .len()
}

/// Distinct clusters among the images of `project_id`.
pub fn visual_flexibility(project_id: &str, images: &[ImageRecord], clusters: &ClusterAssignment) -> usize {
    distinct_clusters(
        images
            .iter()
            .filter(|img| img.project_id == project_id)
            .map(|img| img.image_id.as_str()),
        clusters,
    )
}

/// Distinct clusters among a project's text document ids.
pub fn textual_flexibility<'a>(
    doc_ids: impl IntoIterator<Item = &'a str>,
    clusters: &ClusterAssignment,
) -> usize {
    distinct_clusters(doc_ids, clusters)
}

/// Flexibility of one modality across a studio.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityResult {
    /// Per project, in the order projects were supplied.
    pub counts: Vec<usize>,
    /// `None` when the studio had nothing to cluster.
    pub clusters: Option<ClusterAssignment>,
}

fn resolve_k(requested: Option<usize>, n: usize) -> usize {
    match requested {
        Some(k) if k > n => {
            log::warn!("k = {k} exceeds the {n} items to cluster; using k = {n}");
            n
        }
        Some(k) => k,
        None => default_k(n),
    }
}

/// Clusters all studio images and counts clusters per project.
pub fn studio_visual_flexibility(
    project_ids: &[String],
    images: &[ImageRecord],
    embeddings: &EmbeddingSet,
    k: Option<usize>,
    seed: u64,
) -> Result<ModalityResult, FlexError> {
    if images.is_empty() {
        return Ok(ModalityResult {
            counts: vec![0; project_ids.len()],
            clusters: None,
        });
    }
    let ids: Vec<String> = images.iter().map(|i| i.image_id.clone()).collect();
    for id in &ids {
        if !embeddings.vectors.contains_key(id) {
            return Err(FlexError::MissingEmbedding(id.clone()));
        }
    }
    let vectors = embeddings.vectors_for(images);
    let params = KMeansParams::new(resolve_k(k, images.len()), seed);
    let clusters = cluster_items(&ids, &vectors, &params)?;
    let counts = project_ids
        .iter()
        .map(|p| visual_flexibility(p, images, &clusters))
        .collect();
    Ok(ModalityResult {
        counts,
        clusters: Some(clusters),
    })
}

/// Vectorizes and clusters the studio's text, then counts clusters per
/// project. `docs[i]` holds the documents of `project_ids[i]`.
pub fn studio_textual_flexibility(
    project_ids: &[String],
    docs: &[Vec<TextDocument>],
    k: Option<usize>,
    seed: u64,
) -> Result<ModalityResult, FlexError> {
    let mut ids = Vec::new();
    let mut flat = Vec::new();
    let mut owner: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (pid, project_docs) in project_ids.iter().zip(docs) {
        for (i, d) in project_docs.iter().filter(|d| !d.tokens.is_empty()).enumerate() {
            let id = format!("{pid}#{i}");
            owner.entry(pid.clone()).or_default().push(id.clone());
            ids.push(id);
            flat.push(d.clone());
        }
    }
    if flat.is_empty() {
        return Ok(ModalityResult {
            counts: vec![0; project_ids.len()],
            clusters: None,
        });
    }
    let tfidf = tfidf_vectorize(&flat)?;
    let params = KMeansParams::new(resolve_k(k, flat.len()), seed);
    let clusters = cluster_items(&ids, &tfidf.vectors, &params)?;
    let counts = project_ids
        .iter()
        .map(|p| {
            owner.get(p).map_or(0, |docs| {
                textual_flexibility(docs.iter().map(String::as_str), &clusters)
            })
        })
        .collect();
    Ok(ModalityResult {
        counts,
        clusters: Some(clusters),
    })
}

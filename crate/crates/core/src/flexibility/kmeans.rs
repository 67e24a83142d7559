//! Lloyd's k-means with k-means++ seeding.
//!
//! Everything is driven by a ChaCha8 stream seeded from a single `u64`, so a
//! given `(vectors, k, seed)` always yields the same clustering. Distances are
//! squared Euclidean. Ties in nearest-centroid assignment go to the lowest
//! cluster index.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;

use super::FlexError;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Independent seedings; the run with the lowest inertia wins.
    pub restarts: usize,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams {
            k,
            seed,
            max_iter: DEFAULT_MAX_ITER,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Cluster of each input vector. Labels are numbered by first appearance.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    pub iterations: usize,
}

/// Cluster labels keyed by item id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<String, usize>,
    #[serde(skip)]
    pub centroids: Vec<Vec<f64>>,
    #[serde(skip)]
    pub inertia: f64,
}

impl ClusterAssignment {
    pub fn cluster_of(&self, item: &str) -> Option<usize> {
        self.assignment.get(item).copied()
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn kmeans_pp<V: AsRef<[f64]>>(vectors: &[V], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let first = (rng.next_u64() % n as u64) as usize;
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = vectors
        .iter()
        .map(|v| squared_distance(v.as_ref(), vectors[first].as_ref()))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = unit(rng) * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` past the last partial sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, v) in vectors.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(v.as_ref(), vectors[next].as_ref()));
        }
    }
    chosen.iter().map(|&i| vectors[i].as_ref().to_vec()).collect()
}

struct LloydRun {
    labels: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    inertia: f64,
    iterations: usize,
    /// Inertia after each assignment step.
    #[cfg_attr(not(test), allow(dead_code))]
    trace: Vec<f64>,
}

fn means<V: AsRef<[f64]>>(vectors: &[V], labels: &[usize], k: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut sizes = vec![0usize; k];
    for (v, &l) in vectors.iter().zip(labels) {
        sizes[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(v.as_ref()) {
            *s += x;
        }
    }
    for (s, &size) in sums.iter_mut().zip(&sizes) {
        if size > 0 {
            s.iter_mut().for_each(|x| *x /= size as f64);
        }
    }
    (sums, sizes)
}

fn lloyd<V: AsRef<[f64]>>(vectors: &[V], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> LloydRun {
    let k = centroids.len();
    let dim = centroids[0].len();
    let mut labels: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;

    loop {
        let assigned: Vec<(usize, f64)> = vectors.iter().map(|v| nearest(v.as_ref(), &centroids)).collect();
        let new_labels: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        trace.push(assigned.iter().map(|a| a.1).sum());
        let stable = new_labels == labels;
        labels = new_labels;
        if stable || iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (mut next, mut sizes) = means(vectors, &labels, k, dim);
        // Repair empty clusters with the point farthest from its centroid,
        // taken from a cluster that can spare one.
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let donor = (0..vectors.len())
                .filter(|&i| sizes[labels[i]] > 1)
                .map(|i| (i, squared_distance(vectors[i].as_ref(), &next[labels[i]])))
                .fold(None::<(usize, f64)>, |best, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                });
            let Some((i, _)) = donor else { break };
            let from = labels[i];
            labels[i] = empty;
            sizes[from] -= 1;
            sizes[empty] = 1;
            next = means(vectors, &labels, k, dim).0;
        }
        centroids = next;
    }

    let inertia = *trace.last().unwrap();
    LloydRun {
        labels,
        centroids,
        inertia,
        iterations,
        trace,
    }
}

/// Renumbers clusters in order of first appearance in `labels`.
fn canonical_labels(labels: &[usize], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<Vec<f64>>) {
    let mut map = vec![usize::MAX; centroids.len()];
    let mut order = Vec::new();
    for &l in labels {
        if map[l] == usize::MAX {
            map[l] = order.len();
            order.push(l);
        }
    }
    for (l, slot) in map.iter_mut().enumerate() {
        if *slot == usize::MAX {
            *slot = order.len();
            order.push(l);
        }
    }
    let labels = labels.iter().map(|&l| map[l]).collect();
    let centroids = order.iter().map(|&l| centroids[l].clone()).collect();
    (labels, centroids)
}

fn validate<V: AsRef<[f64]>>(vectors: &[V], k: usize) -> Result<(), FlexError> {
    if k == 0 || k > vectors.len() {
        return Err(FlexError::BadK { k, n: vectors.len() });
    }
    let dim = vectors[0].as_ref().len();
    if let Some(bad) = vectors.iter().position(|v| v.as_ref().len() != dim) {
        return Err(FlexError::DimensionMismatch {
            image: format!("vector {bad}"),
            expected: dim,
            found: vectors[bad].as_ref().len(),
        });
    }
    Ok(())
}

/// Clusters `vectors` into `params.k` groups.
pub fn kmeans_with<V: AsRef<[f64]>>(vectors: &[V], params: &KMeansParams) -> Result<KMeansFit, FlexError> {
    validate(vectors, params.k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<LloydRun> = None;
    for _ in 0..params.restarts.max(1) {
        let init = kmeans_pp(vectors, params.k, &mut rng);
        let run = lloyd(vectors, init, params.max_iter);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let (labels, centroids) = canonical_labels(&best.labels, &best.centroids);
    Ok(KMeansFit {
        labels,
        centroids,
        inertia: best.inertia,
        iterations: best.iterations,
    })
}

/// [`kmeans_with`] using the default iteration cap and restarts.
pub fn kmeans<V: AsRef<[f64]>>(vectors: &[V], k: usize, seed: u64) -> Result<KMeansFit, FlexError> {
    kmeans_with(vectors, &KMeansParams::new(k, seed))
}

/// Clusters identified items.
pub fn cluster_items<V: AsRef<[f64]>>(
    ids: &[String],
    vectors: &[V],
    params: &KMeansParams,
) -> Result<ClusterAssignment, FlexError> {
    assert_eq!(ids.len(), vectors.len(), "one id per vector");
    let fit = kmeans_with(vectors, params)?;
    Ok(ClusterAssignment {
        k: params.k,
        seed: params.seed,
        assignment: ids.iter().cloned().zip(fit.labels).collect(),
        centroids: fit.centroids,
        inertia: fit.inertia,
    })
}

/// `clamp(round(sqrt(n / 2)), 2, 50)`, never more than `n`.
pub fn default_k(n: usize) -> usize {
    let k = ((n as f64 / 2.0).sqrt().round() as usize).clamp(2, 50);
    k.min(n)
}

//! Joint topic space over pooled prompt and answer sentences.
//!
//! The topic count comes from the elbow of the K-means inertia curve; the
//! labels themselves always come from Ward-linkage agglomerative
//! clustering constrained to that count.

mod kmeans;
mod ward;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans, lloyd, select_k_elbow, select_k_elbow_with, ElbowSelection, KMeansFit, DEFAULT_RESTARTS};
pub use ward::{cluster_ward, cluster_ward_threshold};

use crate::corpus::RunBundle;
use crate::textproc::{Role, SentenceRecord};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TopicError {
    #[error("too few points: {rows} rows, need at least {needed}")]
    TooFewPoints { rows: usize, needed: usize },

    #[error("invalid k range [{k_min}, {k_max}]")]
    InvalidRange { k_min: usize, k_max: usize },

    #[error("all points coincide; no cluster structure")]
    DegenerateGeometry,

    #[error("{labels} labels for {sentences} sentences")]
    LengthMismatch { labels: usize, sentences: usize },

    #[error("sentence refers to pair {m} but the bundle has {pairs} pairs")]
    PairOutOfRange { m: usize, pairs: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMode {
    /// Ward clustering cut at the elbow-selected (or overridden) k.
    #[default]
    Ward,
    /// Ward clustering cut at a fixed merge-height threshold.
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterOptions {
    /// Skip the elbow search and use this k.
    pub k: Option<usize>,
    pub k_min: usize,
    /// Upper end of the elbow search; `None` means `min(10, floor(sqrt(S)))`.
    pub k_max: Option<usize>,
    /// Set from the run-level seed, never from the `[clustering]` table.
    #[serde(skip)]
    pub seed: u64,
    pub restarts: usize,
    pub mode: ClusterMode,
    pub distance_threshold: f64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            k: None,
            k_min: 2,
            k_max: None,
            seed: 0,
            restarts: DEFAULT_RESTARTS,
            mode: ClusterMode::Ward,
            distance_threshold: 1.0,
        }
    }
}

/// Outcome of the joint clustering step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    /// One label per pooled sentence, each in `[0, k)`.
    pub labels: Vec<usize>,
    pub inertia_curve: Vec<(usize, f64)>,
    pub method_trace: String,
}

/// Default elbow upper bound for `s` pooled sentences.
pub fn default_k_max(s: usize, k_min: usize) -> usize {
    let root = (s as f64).sqrt().floor() as usize;
    root.min(10).max(k_min)
}

/// Runs the full topic step: elbow (or override), then Ward.
///
/// When every embedding coincides the result is a single topic with all
/// labels 0.
pub fn cluster_topics(embeddings: ArrayView2<f64>, opts: &ClusterOptions) -> Result<ClusteringResult, TopicError> {
    let rows = embeddings.nrows();
    if rows == 0 {
        return Err(TopicError::TooFewPoints { rows: 0, needed: 1 });
    }
    let first = embeddings.row(0);
    if embeddings.rows().into_iter().all(|r| r == first) {
        return Ok(finish(vec![0; rows], Vec::new(), "degenerate geometry -> k=1".into()));
    }

    if opts.mode == ClusterMode::Threshold {
        let labels = cluster_ward_threshold(embeddings, opts.distance_threshold)?;
        return Ok(finish(labels, Vec::new(), format!("ward threshold={}", opts.distance_threshold)));
    }

    let (k, curve, trace) = match opts.k {
        Some(k) => (k, Vec::new(), format!("ward k={k} (override)")),
        None => {
            let k_max = opts.k_max.unwrap_or_else(|| default_k_max(rows, opts.k_min));
            match select_k_elbow_with(embeddings, opts.k_min, k_max, opts.seed, opts.restarts) {
                Ok(sel) => {
                    let trace = format!(
                        "kmeans elbow over k=[{}, {}] (seed {}, {} restarts) -> ward k={}",
                        opts.k_min, sel.k_max, opts.seed, opts.restarts, sel.k
                    );
                    (sel.k, sel.inertia_curve, trace)
                }
                Err(TopicError::DegenerateGeometry) => {
                    return Ok(finish(vec![0; rows], Vec::new(), "degenerate geometry -> k=1".into()))
                }
                Err(e) => return Err(e),
            }
        }
    };
    let labels = cluster_ward(embeddings, k)?;
    Ok(finish(labels, curve, trace))
}

fn finish(labels: Vec<usize>, inertia_curve: Vec<(usize, f64)>, method_trace: String) -> ClusteringResult {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    ClusteringResult { k, labels, inertia_curve, method_trace }
}

/// Topic labels split by role, keyed by paraphrase pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairLabels {
    pub prompt: Vec<usize>,
    pub answer: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicViews {
    pub k: usize,
    /// `L_P`: `(m, topic)` for every prompt sentence, in record order.
    pub prompt: Vec<(usize, usize)>,
    /// `L_A`: `(m, n, topic)` for every answer sentence, in record order.
    pub answer: Vec<(usize, usize, usize)>,
    /// Per-pair label sets, one entry for each of the bundle's `M` pairs.
    pub pairs: Vec<PairLabels>,
}

/// Attaches topic labels to the sentence records and builds the prompt and
/// answer label views.
pub fn assign_labels(
    bundle: &RunBundle,
    sentences: &[SentenceRecord],
    result: &ClusteringResult,
) -> Result<(Vec<SentenceRecord>, TopicViews), TopicError> {
    if sentences.len() != result.labels.len() {
        return Err(TopicError::LengthMismatch { labels: result.labels.len(), sentences: sentences.len() });
    }
    let mut pairs = vec![PairLabels::default(); bundle.m()];
    let mut prompt = Vec::new();
    let mut answer = Vec::new();
    let mut out = Vec::with_capacity(sentences.len());
    for (rec, &label) in sentences.iter().zip(&result.labels) {
        let m = rec.pair_index;
        let pair = pairs.get_mut(m).ok_or(TopicError::PairOutOfRange { m, pairs: bundle.m() })?;
        match rec.role {
            Role::Prompt => {
                prompt.push((m, label));
                pair.prompt.push(label);
            }
            Role::Answer => {
                answer.push((m, rec.sample_index.unwrap_or(0), label));
                pair.answer.push(label);
            }
        }
        let mut rec = rec.clone();
        rec.topic = Some(label);
        out.push(rec);
    }
    Ok((out, TopicViews { k: result.k, prompt, answer, pairs }))
}

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::corpus::RunBundle;
use crate::metrics::entropy_of_counts;
use crate::textproc::Embedder;

/// Label recorded with every SE result; the clustering is an embedding
/// approximation of bidirectional entailment.
pub const SE_METHOD: &str = "greedy cosine clustering of whole-answer embeddings (entailment approximation)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SEResult {
    pub se_original: f64,
    pub se_per_paraphrase: Vec<f64>,
    pub se_mean: f64,
    pub threshold: f64,
    pub cluster_method: String,
}

/// Greedy first-representative clustering of unit-norm rows: each row joins
/// the first existing cluster whose representative has cosine similarity at
/// least `threshold`, otherwise it opens a new cluster.
pub fn greedy_clusters(embeddings: ArrayView2<f64>, threshold: f64) -> Vec<usize> {
    let mut reps: Vec<usize> = Vec::new();
    let mut labels = Vec::with_capacity(embeddings.nrows());
    for (i, row) in embeddings.rows().into_iter().enumerate() {
        let found = reps.iter().position(|&r| embeddings.row(r).dot(&row) >= threshold);
        labels.push(found.unwrap_or_else(|| {
            reps.push(i);
            reps.len() - 1
        }));
    }
    labels
}

/// Shannon entropy (bits) of the cluster-size distribution.
pub fn cluster_sizes_entropy(labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    entropy_of_counts(&counts)
}

/// Semantic entropy of one answer set.
pub fn semantic_entropy(answers: &[String], threshold: f64, embedder: &Embedder<'_>) -> Result<f64, DiagnosticsError> {
    if answers.is_empty() {
        return Err(DiagnosticsError::NoAnswers);
    }
    let emb = embedder.embed_sentences(answers)?;
    Ok(cluster_sizes_entropy(&greedy_clusters(emb.view(), threshold)))
}

/// Semantic entropy of every paraphrase's answer row; entry 0 belongs to the
/// original prompt.
pub fn se_suite(bundle: &RunBundle, threshold: f64, embedder: &Embedder<'_>) -> Result<SEResult, DiagnosticsError> {
    let per_row = bundle
        .answers()
        .iter()
        .map(|row| semantic_entropy(row, threshold, embedder))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = per_row.iter().sum::<f64>() / per_row.len() as f64;
    Ok(SEResult {
        se_original: per_row[0],
        se_mean: mean,
        se_per_paraphrase: per_row,
        threshold,
        cluster_method: SE_METHOD.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_rows_one_cluster() {
        let e = array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        let labels = greedy_clusters(e.view(), 0.92);
        assert_eq!(labels, vec![0, 0, 0]);
        assert_eq!(cluster_sizes_entropy(&labels), 0.0);
    }

    #[test]
    fn orthogonal_rows_are_singletons() {
        let e = ndarray::Array2::<f64>::eye(4);
        let labels = greedy_clusters(e.view(), 0.92);
        assert_eq!(labels, vec![0, 1, 2, 3]);
        assert!((cluster_sizes_entropy(&labels) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_near_duplicate_pairs() {
        // Pairs at cos 0.98; across pairs cos 0 or ~0.2.
        let s = (1.0f64 - 0.98 * 0.98).sqrt();
        let e = array![[1.0, 0.0, 0.0], [0.98, s, 0.0], [0.0, 0.0, 1.0], [0.0, s, 0.98]];
        let labels = greedy_clusters(e.view(), 0.92);
        assert_eq!(labels, vec![0, 0, 1, 1]);
        assert!((cluster_sizes_entropy(&labels) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn representative_rule_not_transitive() {
        // b is close to a, c is close to b but not to a: c opens a cluster.
        let ang = |d: f64| [d.to_radians().cos(), d.to_radians().sin()];
        let rows = [ang(0.0), ang(20.0), ang(40.0)];
        let e = ndarray::Array2::from_shape_fn((3, 2), |(i, j)| rows[i][j]);
        assert_eq!(greedy_clusters(e.view(), 0.92), vec![0, 0, 1]);
    }
}

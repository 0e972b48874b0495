//! Topic distributions, divergences, transport distance and final scores.

mod ensemble;
mod info;
mod report;
mod scores;
mod transport;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use ensemble::{
    average_tables, averaged_joint, ensemble_divergences, ensemble_mi, local_distributions, pair_tables,
    ContingencyTable, EnsembleDivergences, LocalPair,
};
pub use info::{entropy, entropy_of_counts, jsd, kl_divergence, mi_from_joint};
pub use report::{MetricsReport, ReportError, CANONICAL_ROWS, REPORT_SCHEMA};
pub use scores::{kl_score, phi_score, s_h_score, ZERO_ENTROPY_TOLERANCE};
pub use transport::wasserstein1;

use crate::topics::TopicViews;

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("smoothing epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("cannot build a distribution from an empty label list")]
    EmptyLabels,

    #[error("label {label} outside [0, {k})")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("no pair has both prompt and answer sentences")]
    AllPairsEmpty,

    #[error("embedding cloud is empty")]
    EmptyCloud,

    #[error("prompt entropy is zero; score undefined")]
    ZeroPromptEntropy,

    #[error("weights must be non-negative and sum to 1, got ({0}, {1})")]
    InvalidWeights(f64, f64),
}

/// A probability vector over `k` topics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDistribution {
    probs: Vec<f64>,
    support_count: usize,
}

impl TopicDistribution {
    /// Relative label frequencies: `probs[i] = count(i) / len(labels)`.
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self, MetricsError> {
        if labels.is_empty() {
            return Err(MetricsError::EmptyLabels);
        }
        let mut counts = vec![0usize; k];
        for &l in labels {
            *counts.get_mut(l).ok_or(MetricsError::LabelOutOfRange { label: l, k })? += 1;
        }
        let n = labels.len() as f64;
        Ok(Self { probs: counts.into_iter().map(|c| c as f64 / n).collect(), support_count: labels.len() })
    }

    pub fn from_probs(probs: Vec<f64>) -> Result<Self, MetricsError> {
        check_probs(&probs)?;
        Ok(Self { probs, support_count: 0 })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    /// Number of sentences counted; 0 for distributions built from raw
    /// probabilities.
    pub fn support_count(&self) -> usize {
        self.support_count
    }
}

fn check_probs(probs: &[f64]) -> Result<(), MetricsError> {
    if probs.is_empty() {
        return Err(MetricsError::InvalidDistribution("no entries".into()));
    }
    if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(MetricsError::InvalidDistribution(format!("entry {p}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(MetricsError::InvalidDistribution(format!("sums to {sum}")));
    }
    Ok(())
}

/// `k x k` joint distribution, rows prompt topics and columns answer topics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTopicMatrix {
    k: usize,
    /// Row-major.
    probs: Vec<f64>,
    pair_count: usize,
}

impl JointTopicMatrix {
    pub fn from_probs(k: usize, probs: Vec<f64>, pair_count: usize) -> Result<Self, MetricsError> {
        if probs.len() != k * k {
            return Err(MetricsError::DimensionMismatch(probs.len(), k * k));
        }
        check_probs(&probs)?;
        Ok(Self { k, probs, pair_count })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.k + j]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.k)
    }

    /// Number of pairs averaged into the matrix.
    pub fn pair_count(&self) -> usize {
        self.pair_count
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        (0..self.k).map(|j| (0..self.k).map(|i| self.get(i, j)).sum()).collect()
    }

    pub fn max(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    /// Additive KL smoothing.
    pub epsilon: f64,
    pub w_jsd: f64,
    pub w_wass: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { epsilon: 1e-6, w_jsd: 0.7, w_wass: 0.3 }
    }
}

impl MetricOptions {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.epsilon > 0.0) {
            return Err(MetricsError::InvalidEpsilon(self.epsilon));
        }
        let ok = self.w_jsd >= 0.0 && self.w_wass >= 0.0 && (self.w_jsd + self.w_wass - 1.0).abs() <= 1e-12;
        if !ok {
            return Err(MetricsError::InvalidWeights(self.w_jsd, self.w_wass));
        }
        Ok(())
    }
}

/// Everything the metric stage produces for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsOutput {
    pub report: MetricsReport,
    pub joint: JointTopicMatrix,
    pub prompt_dist: TopicDistribution,
    pub answer_dist: TopicDistribution,
}

/// Computes every metric from the labelled topic views and the prompt and
/// answer embedding clouds.
pub fn compute_metrics(
    views: &TopicViews,
    prompt_embeddings: ArrayView2<f64>,
    answer_embeddings: ArrayView2<f64>,
    opts: &MetricOptions,
) -> Result<MetricsOutput, MetricsError> {
    opts.validate()?;
    let k = views.k.max(1);
    let prompt_labels: Vec<usize> = views.prompt.iter().map(|p| p.1).collect();
    let answer_labels: Vec<usize> = views.answer.iter().map(|a| a.2).collect();
    let p = TopicDistribution::from_labels(&prompt_labels, k)?;
    let y = TopicDistribution::from_labels(&answer_labels, k)?;

    let h_prompt = entropy(&p);
    let h_answer = entropy(&y);

    let local = local_distributions(&views.pairs, k)?;
    let ens = ensemble_divergences(&local, opts.epsilon)?;
    let tables = pair_tables(&views.pairs, k)?;
    let joint = average_tables(&tables, k)?;
    let (emi, h_cond) = ensemble_mi(&y, &tables)?;
    let w = wasserstein1(prompt_embeddings, answer_embeddings)?;

    let report = MetricsReport::assemble(report::Components {
        k,
        prompt_sentences: prompt_labels.len(),
        answer_sentences: answer_labels.len(),
        pairs_used: ens.pairs_used,
        pairs_skipped: ens.pairs_skipped,
        h_prompt,
        h_answer,
        global_jsd: jsd(&p, &y)?,
        global_kl_pa: kl_divergence(&p, &y, opts.epsilon)?,
        global_kl_ap: kl_divergence(&y, &p, opts.epsilon)?,
        ensemble_jsd: ens.jsd,
        ensemble_kl_ap: ens.kl_ap,
        ensemble_kl_pa: ens.kl_pa,
        averaged_mi: mi_from_joint(&joint),
        ensemble_mi: emi,
        ensemble_cond_entropy: h_cond,
        wasserstein: w,
        epsilon: opts.epsilon,
        w_jsd: opts.w_jsd,
        w_wass: opts.w_wass,
    });
    Ok(MetricsOutput { report, joint, prompt_dist: p, answer_dist: y })
}

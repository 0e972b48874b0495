//! Entropy, KL, JSD and mutual information over topic distributions, in bits.

use super::{JointTopicMatrix, MetricsError, TopicDistribution};

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(dist: &TopicDistribution) -> f64 {
    entropy_of(dist.probs())
}

pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum();
    h.max(0.0)
}

/// Entropy in bits of the empirical distribution given by `counts`.
pub fn entropy_of_counts(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    entropy_of(&probs)
}

/// `KL(p || q)` in bits after additive `epsilon` smoothing of both
/// arguments (`x' = (x + eps) / (1 + k eps)`).
pub fn kl_divergence(p: &TopicDistribution, q: &TopicDistribution, epsilon: f64) -> Result<f64, MetricsError> {
    if p.k() != q.k() {
        return Err(MetricsError::DimensionMismatch(p.k(), q.k()));
    }
    if !(epsilon > 0.0) {
        return Err(MetricsError::InvalidEpsilon(epsilon));
    }
    let z = 1.0 + p.k() as f64 * epsilon;
    let kl: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(&pi, &qi)| {
            let ps = (pi + epsilon) / z;
            let qs = (qi + epsilon) / z;
            ps * (ps / qs).log2()
        })
        .sum();
    Ok(kl.max(0.0))
}

/// Unsmoothed KL over raw slices; `q` must cover the support of `p`.
fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(&pi, _)| pi > 0.0).map(|(&pi, &qi)| pi * (pi / qi).log2()).sum()
}

/// Jensen-Shannon divergence in bits; lies in `[0, 1]`.
pub fn jsd(p: &TopicDistribution, q: &TopicDistribution) -> Result<f64, MetricsError> {
    if p.k() != q.k() {
        return Err(MetricsError::DimensionMismatch(p.k(), q.k()));
    }
    let m: Vec<f64> = p.probs().iter().zip(q.probs()).map(|(a, b)| 0.5 * (a + b)).collect();
    let d = 0.5 * kl_raw(p.probs(), &m) + 0.5 * kl_raw(q.probs(), &m);
    Ok(d.clamp(0.0, 1.0))
}

/// Mutual information of a joint matrix, using its own marginals.
pub fn mi_from_joint(joint: &JointTopicMatrix) -> f64 {
    let k = joint.k();
    let px = joint.row_marginal();
    let py = joint.col_marginal();
    let mut mi = 0.0;
    for i in 0..k {
        for j in 0..k {
            let pij = joint.get(i, j);
            if pij > 0.0 {
                mi += pij * (pij / (px[i] * py[j])).log2();
            }
        }
    }
    mi.max(0.0)
}

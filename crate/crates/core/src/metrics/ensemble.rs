//! Average-later metrics over the paraphrase pairs.

use super::info::{entropy_of, jsd, kl_divergence};
use super::{JointTopicMatrix, MetricsError, TopicDistribution};
use crate::topics::PairLabels;

/// Local prompt and answer distributions for one pair, or `None` when the
/// pair has no prompt sentences or no answer sentences.
pub type LocalPair = Option<(TopicDistribution, TopicDistribution)>;

pub fn local_distributions(pairs: &[PairLabels], k: usize) -> Result<Vec<LocalPair>, MetricsError> {
    pairs
        .iter()
        .map(|p| {
            if p.prompt.is_empty() || p.answer.is_empty() {
                return Ok(None);
            }
            Ok(Some((TopicDistribution::from_labels(&p.prompt, k)?, TopicDistribution::from_labels(&p.answer, k)?)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleDivergences {
    pub jsd: f64,
    /// Mean of `KL(A_m || P_m)`.
    pub kl_ap: f64,
    /// Mean of `KL(P_m || A_m)`.
    pub kl_pa: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

/// Arithmetic means of the per-pair JSD and both KL directions, skipping
/// empty pairs. Sums run in pair order.
pub fn ensemble_divergences(pairs: &[LocalPair], epsilon: f64) -> Result<EnsembleDivergences, MetricsError> {
    let (mut s_jsd, mut s_ap, mut s_pa) = (0.0, 0.0, 0.0);
    let mut used = 0usize;
    for (p, a) in pairs.iter().flatten() {
        s_jsd += jsd(p, a)?;
        s_ap += kl_divergence(a, p, epsilon)?;
        s_pa += kl_divergence(p, a, epsilon)?;
        used += 1;
    }
    if used == 0 {
        return Err(MetricsError::AllPairsEmpty);
    }
    let n = used as f64;
    Ok(EnsembleDivergences {
        jsd: s_jsd / n,
        kl_ap: s_ap / n,
        kl_pa: s_pa / n,
        pairs_used: used,
        pairs_skipped: pairs.len() - used,
    })
}

/// Local `k x k` co-occurrence counts of one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    k: usize,
    counts: Vec<f64>,
}

impl ContingencyTable {
    /// Every prompt sentence co-occurs with every answer sentence of the
    /// pair: `C[i][j] = #prompt sentences in i * #answer sentences in j`.
    pub fn from_pair(prompt: &[usize], answer: &[usize], k: usize) -> Result<Self, MetricsError> {
        let mut cp = vec![0.0; k];
        let mut ca = vec![0.0; k];
        for &l in prompt {
            *cp.get_mut(l).ok_or(MetricsError::LabelOutOfRange { label: l, k })? += 1.0;
        }
        for &l in answer {
            *ca.get_mut(l).ok_or(MetricsError::LabelOutOfRange { label: l, k })? += 1.0;
        }
        let mut counts = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                counts[i * k + j] = cp[i] * ca[j];
            }
        }
        Ok(Self { k, counts })
    }

    /// A table from explicit non-negative counts, row-major.
    pub fn from_counts(k: usize, counts: Vec<f64>) -> Result<Self, MetricsError> {
        if counts.len() != k * k {
            return Err(MetricsError::DimensionMismatch(counts.len(), k * k));
        }
        if counts.iter().any(|c| !(*c >= 0.0)) {
            return Err(MetricsError::InvalidDistribution("negative count".into()));
        }
        Ok(Self { k, counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// `P_m(X, Y)`, or `None` for an all-zero table.
    pub fn normalized(&self) -> Option<Vec<f64>> {
        let total = self.total();
        (total > 0.0).then(|| self.counts.iter().map(|c| c / total).collect())
    }

    /// `H(Y | X) = H(X, Y) - H(X)` of the normalized table.
    pub fn conditional_entropy(&self) -> Option<f64> {
        let p = self.normalized()?;
        let px: Vec<f64> = (0..self.k).map(|i| p[i * self.k..(i + 1) * self.k].iter().sum()).collect();
        Some((entropy_of(&p) - entropy_of(&px)).max(0.0))
    }
}

pub fn pair_tables(pairs: &[PairLabels], k: usize) -> Result<Vec<ContingencyTable>, MetricsError> {
    pairs
        .iter()
        .filter(|p| !p.prompt.is_empty() && !p.answer.is_empty())
        .map(|p| ContingencyTable::from_pair(&p.prompt, &p.answer, k))
        .collect()
}

/// Element-wise mean of the normalized local tables of all non-empty pairs.
pub fn averaged_joint(pairs: &[PairLabels], k: usize) -> Result<JointTopicMatrix, MetricsError> {
    average_tables(&pair_tables(pairs, k)?, k)
}

pub fn average_tables(tables: &[ContingencyTable], k: usize) -> Result<JointTopicMatrix, MetricsError> {
    let mut acc = vec![0.0; k * k];
    let mut used = 0usize;
    for t in tables {
        if t.k() != k {
            return Err(MetricsError::DimensionMismatch(t.k(), k));
        }
        if let Some(p) = t.normalized() {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
            used += 1;
        }
    }
    if used == 0 {
        return Err(MetricsError::AllPairsEmpty);
    }
    for a in acc.iter_mut() {
        *a /= used as f64;
    }
    JointTopicMatrix::from_probs(k, acc, used)
}

/// Ensemble mutual information `H(Y) - mean_m H(Y_m | X_m)`.
///
/// Returns `(emi, mean conditional entropy)`. The difference can be negative
/// when the global answer distribution is less spread than the local ones;
/// it is reported as computed.
pub fn ensemble_mi(global_answer: &TopicDistribution, tables: &[ContingencyTable]) -> Result<(f64, f64), MetricsError> {
    let mut sum = 0.0;
    let mut used = 0usize;
    for t in tables {
        if let Some(h) = t.conditional_entropy() {
            sum += h;
            used += 1;
        }
    }
    if used == 0 {
        return Err(MetricsError::AllPairsEmpty);
    }
    let h_cond = sum / used as f64;
    Ok((entropy_of(global_answer.probs()) - h_cond, h_cond))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::info::mi_from_joint;
    use approx::assert_abs_diff_eq;

    fn d(p: &[f64]) -> TopicDistribution {
        TopicDistribution::from_probs(p.to_vec()).unwrap()
    }

    fn pair(prompt: &[usize], answer: &[usize]) -> PairLabels {
        PairLabels { prompt: prompt.to_vec(), answer: answer.to_vec() }
    }

    #[test]
    fn mean_of_one_is_the_value() {
        let (p, a) = (d(&[0.7, 0.3]), d(&[0.1, 0.9]));
        let e = ensemble_divergences(&[Some((p.clone(), a.clone()))], 1e-6).unwrap();
        assert_eq!(e.jsd, jsd(&p, &a).unwrap());
        assert_eq!(e.kl_ap, kl_divergence(&a, &p, 1e-6).unwrap());
    }

    #[test]
    fn arithmetic_mean_of_two() {
        let first = (d(&[0.5, 0.5]), d(&[0.9, 0.1]));
        let second = (d(&[1.0, 0.0]), d(&[0.2, 0.8]));
        let j1 = jsd(&first.0, &first.1).unwrap();
        let j2 = jsd(&second.0, &second.1).unwrap();
        let e = ensemble_divergences(&[Some(first), None, Some(second)], 1e-6).unwrap();
        assert_abs_diff_eq!(e.jsd, (j1 + j2) / 2.0, epsilon = 1e-15);
        assert_eq!((e.pairs_used, e.pairs_skipped), (2, 1));
    }

    #[test]
    fn all_empty_is_an_error() {
        assert!(matches!(ensemble_divergences(&[None, None], 1e-6), Err(MetricsError::AllPairsEmpty)));
        assert!(matches!(averaged_joint(&[pair(&[0], &[])], 2), Err(MetricsError::AllPairsEmpty)));
    }

    /// Recomputes per-pair JSD and KL from raw label counts, independently of
    /// `TopicDistribution`.
    fn oracle(pairs: &[PairLabels], k: usize, eps: f64) -> (f64, f64) {
        let mut js = Vec::new();
        let mut kl = Vec::new();
        for p in pairs {
            if p.prompt.is_empty() || p.answer.is_empty() {
                continue;
            }
            let freq = |ls: &[usize]| {
                (0..k).map(|t| ls.iter().filter(|&&l| l == t).count() as f64 / ls.len() as f64).collect::<Vec<_>>()
            };
            let (pp, aa) = (freq(&p.prompt), freq(&p.answer));
            let mut j = 0.0;
            for t in 0..k {
                let m = (pp[t] + aa[t]) / 2.0;
                if pp[t] > 0.0 {
                    j += 0.5 * pp[t] * (pp[t] / m).ln();
                }
                if aa[t] > 0.0 {
                    j += 0.5 * aa[t] * (aa[t] / m).ln();
                }
            }
            js.push(j / std::f64::consts::LN_2);
            let z = 1.0 + k as f64 * eps;
            let mut x = 0.0;
            for t in 0..k {
                let a = (aa[t] + eps) / z;
                let b = (pp[t] + eps) / z;
                x += a * (a / b).ln();
            }
            kl.push(x / std::f64::consts::LN_2);
        }
        (js.iter().sum::<f64>() / js.len() as f64, kl.iter().sum::<f64>() / kl.len() as f64)
    }

    #[test]
    fn three_pair_fixture_matches_oracle() {
        let pairs = vec![pair(&[0, 1], &[0, 0, 2]), pair(&[1], &[1, 2, 2, 2]), pair(&[0, 2, 2], &[0])];
        let local = local_distributions(&pairs, 3).unwrap();
        let e = ensemble_divergences(&local, 1e-6).unwrap();
        let (js, kl) = oracle(&pairs, 3, 1e-6);
        assert_abs_diff_eq!(e.jsd, js, epsilon = 1e-12);
        assert_abs_diff_eq!(e.kl_ap, kl, epsilon = 1e-9);
    }

    #[test]
    fn averaged_joint_examples() {
        let j = averaged_joint(&[pair(&[0], &[1])], 2).unwrap();
        assert_eq!(j.probs(), &[0.0, 1.0, 0.0, 0.0]);

        let single = averaged_joint(&[pair(&[0, 1], &[1, 1, 0])], 2).unwrap();
        let twice = averaged_joint(&[pair(&[0, 1], &[1, 1, 0]), pair(&[0, 1], &[1, 1, 0])], 2).unwrap();
        assert_eq!(single.probs(), twice.probs());
        assert_eq!(twice.pair_count(), 2);

        let j = averaged_joint(&[pair(&[0, 1], &[0])], 2).unwrap();
        assert_eq!(j.probs(), &[0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn emi_single_pair_identity() {
        let t = ContingencyTable::from_counts(2, vec![3.0, 1.0, 0.0, 4.0]).unwrap();
        let p = t.normalized().unwrap();
        let y = d(&[p[0] + p[2], p[1] + p[3]]);
        let (emi, _) = ensemble_mi(&y, std::slice::from_ref(&t)).unwrap();
        let joint = JointTopicMatrix::from_probs(2, p, 1).unwrap();
        assert_abs_diff_eq!(emi, mi_from_joint(&joint), epsilon = 1e-12);
    }

    #[test]
    fn emi_deterministic_tables() {
        let t1 = ContingencyTable::from_counts(3, vec![2.0, 0.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0]).unwrap();
        let t2 = ContingencyTable::from_pair(&[1, 1], &[2], 3).unwrap();
        let y = d(&[0.2, 0.3, 0.5]);
        let (emi, hc) = ensemble_mi(&y, &[t1, t2]).unwrap();
        assert_eq!(hc, 0.0);
        assert_abs_diff_eq!(emi, entropy_of(y.probs()), epsilon = 1e-15);
    }

    #[test]
    fn emi_three_pair_fixture() {
        let pairs = vec![pair(&[0, 1], &[0, 0, 2]), pair(&[1], &[1, 2, 2, 2]), pair(&[0, 2, 2], &[0])];
        let tables = pair_tables(&pairs, 3).unwrap();
        let all_answers: Vec<usize> = pairs.iter().flat_map(|p| p.answer.clone()).collect();
        let y = TopicDistribution::from_labels(&all_answers, 3).unwrap();
        let (emi, hc) = ensemble_mi(&y, &tables).unwrap();

        // Oracle: conditional entropy straight from the count tables, in nats.
        let mut h_sum = 0.0;
        for p in &pairs {
            let mut c = [[0.0f64; 3]; 3];
            for &i in &p.prompt {
                for &j in &p.answer {
                    c[i][j] += 1.0;
                }
            }
            let total: f64 = c.iter().flatten().sum();
            let mut h = 0.0;
            for row in &c {
                let rs: f64 = row.iter().sum();
                for &v in row {
                    if v > 0.0 {
                        h -= (v / total) * (v / rs).ln();
                    }
                }
            }
            h_sum += h / std::f64::consts::LN_2;
        }
        let h_cond = h_sum / 3.0;
        let hy: f64 = -y.probs().iter().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>();
        assert_abs_diff_eq!(hc, h_cond, epsilon = 1e-12);
        assert_abs_diff_eq!(emi, hy - h_cond, epsilon = 1e-12);
    }
}

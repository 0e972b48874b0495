//! Entropy-normalized final scores.

use super::MetricsError;

/// Prompt entropies at or below this are treated as zero.
pub const ZERO_ENTROPY_TOLERANCE: f64 = 1e-12;

fn check_h(h_prompt: f64) -> Result<(), MetricsError> {
    if h_prompt > ZERO_ENTROPY_TOLERANCE {
        Ok(())
    } else {
        Err(MetricsError::ZeroPromptEntropy)
    }
}

/// `phi = (H(Y) - I) / H(X)`: the share of answer complexity not explained
/// by the prompt.
pub fn phi_score(h_answer: f64, mi: f64, h_prompt: f64) -> Result<f64, MetricsError> {
    check_h(h_prompt)?;
    Ok((h_answer - mi) / h_prompt)
}

/// `S_H = (w_jsd * jsd + w_wass * W) / H(P)`.
pub fn s_h_score(ensemble_jsd: f64, wasserstein: f64, h_prompt: f64, w_jsd: f64, w_wass: f64) -> Result<f64, MetricsError> {
    check_h(h_prompt)?;
    if !(w_jsd >= 0.0 && w_wass >= 0.0 && (w_jsd + w_wass - 1.0).abs() <= 1e-12) {
        return Err(MetricsError::InvalidWeights(w_jsd, w_wass));
    }
    Ok((w_jsd * ensemble_jsd + w_wass * wasserstein) / h_prompt)
}

/// `KL(A || P) / H(P)`.
pub fn kl_score(ensemble_kl_ap: f64, h_prompt: f64) -> Result<f64, MetricsError> {
    check_h(h_prompt)?;
    Ok(ensemble_kl_ap / h_prompt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn phi_examples() {
        assert_eq!(phi_score(2.0, 0.0, 2.0).unwrap(), 1.0);
        assert_eq!(phi_score(2.0, 2.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(phi_score(2.0014, 0.0174, 1.9165).unwrap(), 1.0352, epsilon = 5e-5);
        assert_eq!(phi_score(1.0, 0.0, 0.0), Err(MetricsError::ZeroPromptEntropy));
    }

    #[test]
    fn s_h_examples() {
        assert_abs_diff_eq!(s_h_score(0.4492, 0.8162, 1.9165, 0.7, 0.3).unwrap(), 0.2918, epsilon = 5e-4);
        assert_abs_diff_eq!(s_h_score(0.6626, 0.8503, 1.2147, 0.7, 0.3).unwrap(), 0.5919, epsilon = 5e-4);
        assert_eq!(s_h_score(0.0, 0.0, 1.3, 0.7, 0.3).unwrap(), 0.0);
        assert_eq!(s_h_score(0.1, 0.1, 0.0, 0.7, 0.3), Err(MetricsError::ZeroPromptEntropy));
        assert!(matches!(s_h_score(0.1, 0.1, 1.0, 0.7, 0.7), Err(MetricsError::InvalidWeights(..))));
    }

    #[test]
    fn kl_score_examples() {
        assert_eq!(kl_score(0.0, 1.7).unwrap(), 0.0);
        assert_abs_diff_eq!(kl_score(13.701, 1.9165).unwrap(), 7.149, epsilon = 1e-2);
        assert_eq!(kl_score(2.0, 2.0).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn s_h_homogeneous_and_decreasing(j in 0.0..1.0f64, w in 0.0..2.0f64, h in 0.1..4.0f64, c in 0.1..10.0f64) {
            let base = s_h_score(j, w, h, 0.7, 0.3).unwrap();
            let scaled = s_h_score(c * j, c * w, h, 0.7, 0.3).unwrap();
            prop_assert!((scaled - c * base).abs() <= 1e-12 * (1.0 + scaled.abs()));
            if j + w > 0.0 {
                prop_assert!(s_h_score(j, w, h * 1.1, 0.7, 0.3).unwrap() < base);
            }
        }
    }
}

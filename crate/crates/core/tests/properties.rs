use ndarray::Array2;
use proptest::prelude::*;

use sdm_core::diagnostics::{classify_semantic_box, heatmap_csv, parse_heatmap_csv, Axis, Thresholds};
use sdm_core::metrics::{
    averaged_joint, entropy, jsd, kl_divergence, mi_from_joint, s_h_score, wasserstein1, JointTopicMatrix,
    TopicDistribution,
};
use sdm_core::topics::PairLabels;

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s <= 0.0 {
        let k = v.len();
        return vec![1.0 / k as f64; k];
    }
    v.into_iter().map(|x| x / s).collect()
}

/// Distributions over up to 8 topics, zero entries included.
fn probs(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], k).prop_map(normalize)
}

fn pair_of_dists() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=8).prop_flat_map(|k| (probs(k), probs(k)))
}

fn joint() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=8).prop_flat_map(|k| probs(k * k).prop_map(move |p| (k, p)))
}

fn cloud(n: usize, d: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * d).prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
}

fn h(p: &[f64]) -> f64 {
    p.iter().filter(|x| **x > 0.0).map(|x| -x * x.log2()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn jsd_symmetric_and_bounded((p, q) in pair_of_dists()) {
        let (p, q) = (TopicDistribution::from_probs(p).unwrap(), TopicDistribution::from_probs(q).unwrap());
        let a = jsd(&p, &q).unwrap();
        prop_assert!((a - jsd(&q, &p).unwrap()).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(jsd(&p, &p).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn smoothed_kl_non_negative((p, q) in pair_of_dists(), eps in 1e-9..1e-3f64) {
        let (p, q) = (TopicDistribution::from_probs(p).unwrap(), TopicDistribution::from_probs(q).unwrap());
        prop_assert!(kl_divergence(&p, &q, eps).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&p, &p, eps).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn entropy_bounded_by_log_k(p in (1usize..=8).prop_flat_map(probs)) {
        let k = p.len() as f64;
        let e = entropy(&TopicDistribution::from_probs(p).unwrap());
        prop_assert!(e >= 0.0 && e <= k.log2() + 1e-12);
    }

    #[test]
    fn mutual_information_identity((k, p) in joint()) {
        let rows: Vec<f64> = p.chunks(k).map(|r| r.iter().sum()).collect();
        let cols: Vec<f64> = (0..k).map(|j| (0..k).map(|i| p[i * k + j]).sum()).collect();
        let expected = h(&rows) + h(&cols) - h(&p);
        let mi = mi_from_joint(&JointTopicMatrix::from_probs(k, p, 1).unwrap());
        prop_assert!((mi - expected).abs() <= 1e-9);
        prop_assert!(mi >= 0.0);
    }

    #[test]
    fn averaged_joint_is_a_distribution(
        k in 1usize..=5,
        pairs in prop::collection::vec((prop::collection::vec(0usize..5, 0..6), prop::collection::vec(0usize..5, 0..6)), 1..6),
    ) {
        let pairs: Vec<PairLabels> = pairs
            .into_iter()
            .map(|(p, a)| PairLabels { prompt: p.into_iter().map(|l| l % k).collect(), answer: a.into_iter().map(|l| l % k).collect() })
            .collect();
        let usable = pairs.iter().filter(|p| !p.prompt.is_empty() && !p.answer.is_empty()).count();
        match averaged_joint(&pairs, k) {
            Ok(j) => {
                prop_assert_eq!(j.pair_count(), usable);
                prop_assert!((j.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
            Err(_) => prop_assert_eq!(usable, 0),
        }
    }

    #[test]
    fn wasserstein_is_a_metric(n in 1usize..=5, d in 1usize..=4, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize| Array2::from_shape_fn((rows, d), |_| rng.gen_range(-1.0..1.0f64));
        let (x, y, z) = (draw(n), draw(n + 1), draw(2));
        let xy = wasserstein1(x.view(), y.view()).unwrap();
        prop_assert!(wasserstein1(x.view(), x.view()).unwrap().abs() <= 1e-12);
        prop_assert!((xy - wasserstein1(y.view(), x.view()).unwrap()).abs() <= 1e-9);
        let via = wasserstein1(x.view(), z.view()).unwrap() + wasserstein1(z.view(), y.view()).unwrap();
        prop_assert!(xy <= via + 1e-9);
    }

    #[test]
    fn wasserstein_translation(x in cloud(4, 3), shift in prop::array::uniform3(-2.0..2.0f64)) {
        let moved = &x + &ndarray::arr1(&shift);
        let norm = shift.iter().map(|s| s * s).sum::<f64>().sqrt();
        prop_assert!((wasserstein1(x.view(), moved.view()).unwrap() - norm).abs() <= 1e-9);
    }

    #[test]
    fn heatmap_round_trip((k, p) in joint()) {
        let j = JointTopicMatrix::from_probs(k, p, 1).unwrap();
        let rows = parse_heatmap_csv(&heatmap_csv(&j)).unwrap();
        for (i, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                prop_assert!((v - j.get(i, c)).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn s_h_scales_with_components(j in 0.0..1.0f64, w in 0.0..2.0f64, hp in 0.05..4.0f64) {
        let s = s_h_score(j, w, hp, 0.7, 0.3).unwrap();
        prop_assert!(s >= 0.0);
        prop_assert!(s_h_score((j + 0.1).min(1.0), w, hp, 0.7, 0.3).unwrap() >= s);
        prop_assert!(s_h_score(j, w + 0.1, hp, 0.7, 0.3).unwrap() > s);
    }

    #[test]
    fn semantic_box_axes_follow_thresholds(s in 0.0..2.0f64, kl in 0.0..20.0f64, s_star in 0.01..1.0f64, kl_star in 0.1..10.0f64) {
        let v = classify_semantic_box(s, kl, Thresholds { s_star, kl_star });
        prop_assert_eq!(v.instability_axis == Axis::High, s > s_star);
        prop_assert_eq!(v.exploration_axis == Axis::High, kl > kl_star);
    }
}

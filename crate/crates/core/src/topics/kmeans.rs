use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TopicError;

/// Seeded restarts per candidate k.
pub const DEFAULT_RESTARTS: usize = 10;
const MAX_ITER: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centroids: Array2<f64>,
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: ArrayView1<f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(point, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: first centre uniform, then proportional to squared
/// distance from the closest chosen centre.
fn seed_plus_plus(data: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = data.nrows();
    let mut centroids = Array2::zeros((k, data.ncols()));
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).assign(&data.row(first));
    chosen[first] = true;
    let mut d2: Vec<f64> = data.rows().into_iter().map(|r| sq_dist(r, data.row(first))).collect();

    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // Every point coincides with a centre already; take any unused one.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.row_mut(c).assign(&data.row(pick));
        for (i, r) in data.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, data.row(pick)));
        }
    }
    centroids
}

/// Lloyd iterations from the given starting centres.
pub fn lloyd(data: ArrayView2<f64>, mut centroids: Array2<f64>) -> KMeansFit {
    let n = data.nrows();
    let k = centroids.nrows();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..MAX_ITER {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for (i, row) in data.rows().into_iter().enumerate() {
            let (c, d) = nearest(row, &centroids);
            dists[i] = d;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }

        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        for (i, row) in data.rows().into_iter().enumerate() {
            counts[labels[i]] += 1;
            let mut s = sums.row_mut(labels[i]);
            s += &row;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centroids.row_mut(c).assign(&mean);
            } else {
                // Move an empty centre onto the worst-served point.
                let (far, _) = dists
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
                centroids.row_mut(c).assign(&data.row(far));
                dists[far] = 0.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = data.rows().into_iter().zip(&labels).map(|(r, &c)| sq_dist(r, centroids.row(c))).sum();
    KMeansFit { centroids, labels, inertia }
}

/// Best of `restarts` seeded k-means++ runs, plus an optional warm start.
pub fn kmeans(
    data: ArrayView2<f64>,
    k: usize,
    seed: u64,
    restarts: usize,
    warm_start: Option<Array2<f64>>,
) -> KMeansFit {
    let mut best: Option<KMeansFit> = None;
    let mut consider = |fit: KMeansFit| {
        if best.as_ref().map_or(true, |b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    };
    if let Some(init) = warm_start {
        consider(lloyd(data, init));
    }
    for restart in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((k as u64) << 32) | restart as u64);
        consider(lloyd(data, seed_plus_plus(data, k, &mut rng)));
    }
    best.expect("at least one restart")
}

/// The `k` and inertia curve chosen by [`select_k_elbow`].
#[derive(Debug, Clone, PartialEq)]
pub struct ElbowSelection {
    pub k: usize,
    /// `(k, inertia)` for every evaluated k, including the neighbours
    /// `k_min - 1` and `k_max + 1` used for the curvature at the ends.
    pub inertia_curve: Vec<(usize, f64)>,
    /// Effective upper bound after clamping to the row count.
    pub k_max: usize,
}

/// Picks the number of clusters at the elbow of the K-means inertia curve.
///
/// Inertia is evaluated for every k in `[k_min - 1, k_max + 1]`. The chosen
/// k in `[k_min, k_max]` maximizes the discrete curvature
/// `(I(k-1) - 2 I(k) + I(k+1)) / (I_max - I_min)`; ties go to the smaller k.
/// `k_max` is clamped to `rows - 1`. Each k is warm-started from the best
/// solution for `k - 1` plus its worst-served point, so the curve is
/// non-increasing.
pub fn select_k_elbow(
    embeddings: ArrayView2<f64>,
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<ElbowSelection, TopicError> {
    select_k_elbow_with(embeddings, k_min, k_max, seed, DEFAULT_RESTARTS)
}

pub fn select_k_elbow_with(
    embeddings: ArrayView2<f64>,
    k_min: usize,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> Result<ElbowSelection, TopicError> {
    let rows = embeddings.nrows();
    if k_min < 2 || k_max < k_min {
        return Err(TopicError::InvalidRange { k_min, k_max });
    }
    if rows < k_min + 1 {
        return Err(TopicError::TooFewPoints { rows, needed: k_min + 1 });
    }
    let k_max = k_max.min(rows - 1);
    let lo = k_min - 1;
    let hi = k_max + 1;

    let mut curve = Vec::with_capacity(hi - lo + 1);
    let mut prev: Option<KMeansFit> = None;
    for k in lo..=hi {
        let warm = prev.as_ref().map(|p| {
            let mut init = Array2::zeros((k, embeddings.ncols()));
            init.slice_mut(ndarray::s![..k - 1, ..]).assign(&p.centroids);
            let far = (0..rows)
                .map(|i| (i, sq_dist(embeddings.row(i), p.centroids.row(p.labels[i]))))
                .fold((0, f64::NEG_INFINITY), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc })
                .0;
            init.row_mut(k - 1).assign(&embeddings.row(far));
            init
        });
        let fit = kmeans(embeddings, k, seed, restarts, warm);
        curve.push((k, fit.inertia));
        prev = Some(fit);
    }

    let (imin, imax) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, i)| (lo.min(i), hi.max(i)));
    let range = imax - imin;
    if !(range > 1e-12 * imax.max(1.0)) {
        return Err(TopicError::DegenerateGeometry);
    }

    let mut best_k = k_min;
    let mut best_score = f64::NEG_INFINITY;
    for k in k_min..=k_max {
        let at = |kk: usize| curve[kk - lo].1;
        let score = (at(k - 1) - 2.0 * at(k) + at(k + 1)) / range;
        if score > best_score + 1e-12 {
            best_score = score;
            best_k = k;
        }
    }
    Ok(ElbowSelection { k: best_k, inertia_curve: curve, k_max })
}

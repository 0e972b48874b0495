use std::collections::HashMap;

use ndarray::ArrayView2;

use super::TopicError;

/// Agglomerative clustering state over the distinct rows of the input.
///
/// Exactly repeated rows are merged up front into one weighted singleton,
/// so identical embeddings can never be split across clusters.
struct Agglomeration {
    /// Distinct-point index for every input row.
    point_of_row: Vec<usize>,
    /// Current cluster of every distinct point.
    cluster_of_point: Vec<usize>,
    active: Vec<bool>,
    size: Vec<f64>,
    /// Lance-Williams Ward dissimilarity, `2 n_a n_b / (n_a + n_b) * |c_a - c_b|^2`,
    /// stored row-major over distinct points.
    dist: Vec<f64>,
    n: usize,
    clusters: usize,
}

impl Agglomeration {
    fn new(data: ArrayView2<f64>) -> Self {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut reps: Vec<usize> = Vec::new();
        let mut size: Vec<f64> = Vec::new();
        let mut point_of_row = Vec::with_capacity(data.nrows());
        for (r, row) in data.rows().into_iter().enumerate() {
            // +0.0 and -0.0 compare equal but differ in bits; canonicalize.
            let key: Vec<u64> = row.iter().map(|x| (x + 0.0).to_bits()).collect();
            let p = *index.entry(key).or_insert_with(|| {
                reps.push(r);
                size.push(0.0);
                reps.len() - 1
            });
            size[p] += 1.0;
            point_of_row.push(p);
        }

        let n = reps.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d2: f64 = data
                    .row(reps[i])
                    .iter()
                    .zip(data.row(reps[j]).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let w = 2.0 * size[i] * size[j] / (size[i] + size[j]);
                dist[i * n + j] = w * d2;
                dist[j * n + i] = w * d2;
            }
        }
        Self {
            point_of_row,
            cluster_of_point: (0..n).collect(),
            active: vec![true; n],
            size,
            dist,
            n,
            clusters: n,
        }
    }

    /// Closest active pair; ties resolve to the lexicographically smallest.
    fn closest_pair(&self) -> (usize, usize, f64) {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..self.n {
            if !self.active[i] {
                continue;
            }
            let row = &self.dist[i * self.n..(i + 1) * self.n];
            for j in (i + 1)..self.n {
                if self.active[j] && row[j] < best.2 {
                    best = (i, j, row[j]);
                }
            }
        }
        best
    }

    /// Merges cluster `b` into `a` with the Lance-Williams Ward update.
    fn merge(&mut self, a: usize, b: usize) {
        let n = self.n;
        let (sa, sb) = (self.size[a], self.size[b]);
        let dab = self.dist[a * n + b];
        for k in 0..n {
            if !self.active[k] || k == a || k == b {
                continue;
            }
            let sk = self.size[k];
            let d = ((sa + sk) * self.dist[a * n + k] + (sb + sk) * self.dist[b * n + k] - sk * dab) / (sa + sb + sk);
            let d = d.max(0.0);
            self.dist[a * n + k] = d;
            self.dist[k * n + a] = d;
        }
        self.size[a] = sa + sb;
        self.active[b] = false;
        for c in self.cluster_of_point.iter_mut() {
            if *c == b {
                *c = a;
            }
        }
        self.clusters -= 1;
    }

    /// Labels per input row, numbered by first appearance.
    fn labels(&self) -> Vec<usize> {
        let mut renumber: HashMap<usize, usize> = HashMap::new();
        self.point_of_row
            .iter()
            .map(|&p| {
                let c = self.cluster_of_point[p];
                let next = renumber.len();
                *renumber.entry(c).or_insert(next)
            })
            .collect()
    }
}

/// Ward-linkage agglomerative clustering down to `k` clusters.
///
/// Labels are numbered in order of first appearance. When the input has
/// fewer than `k` distinct rows, every distinct row keeps its own cluster and
/// fewer than `k` labels are produced.
pub fn cluster_ward(embeddings: ArrayView2<f64>, k: usize) -> Result<Vec<usize>, TopicError> {
    let rows = embeddings.nrows();
    if k == 0 || rows < k {
        return Err(TopicError::TooFewPoints { rows, needed: k.max(1) });
    }
    let mut agg = Agglomeration::new(embeddings);
    while agg.clusters > k {
        let (a, b, _) = agg.closest_pair();
        agg.merge(a, b);
    }
    Ok(agg.labels())
}

/// Ward-linkage clustering that keeps merging while the merge height
/// (`sqrt` of the Ward dissimilarity, the scipy convention) stays below
/// `threshold`.
pub fn cluster_ward_threshold(embeddings: ArrayView2<f64>, threshold: f64) -> Result<Vec<usize>, TopicError> {
    if embeddings.nrows() == 0 {
        return Err(TopicError::TooFewPoints { rows: 0, needed: 1 });
    }
    let mut agg = Agglomeration::new(embeddings);
    while agg.clusters > 1 {
        let (a, b, d) = agg.closest_pair();
        if d.sqrt() >= threshold {
            break;
        }
        agg.merge(a, b);
    }
    Ok(agg.labels())
}

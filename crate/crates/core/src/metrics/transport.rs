//! Exact 1-Wasserstein distance between two uniform point clouds.

use ndarray::ArrayView2;

use super::MetricsError;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn euclidean(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Earth mover's distance between the uniform measures on the rows of `p`
/// and the rows of `a`, with Euclidean ground cost.
///
/// Masses are scaled to integers (`|A| / g` units per prompt point, `|P| / g`
/// per answer point, `g = gcd(|P|, |A|)`) and the transportation problem is
/// solved to optimality by successive shortest augmenting paths.
pub fn wasserstein1(p: ArrayView2<f64>, a: ArrayView2<f64>) -> Result<f64, MetricsError> {
    let (np, na) = (p.nrows(), a.nrows());
    if np == 0 || na == 0 {
        return Err(MetricsError::EmptyCloud);
    }
    if p.ncols() != a.ncols() {
        return Err(MetricsError::DimensionMismatch(p.ncols(), a.ncols()));
    }
    let mut cost = vec![0.0; np * na];
    for i in 0..np {
        for j in 0..na {
            cost[i * na + j] = euclidean(p.row(i), a.row(j));
        }
    }
    let g = gcd(np as u64, na as u64);
    let flow = Transport::new(np, na, na as u64 / g, np as u64 / g, &cost).solve();
    let total_mass = (np as u64 * na as u64 / g) as f64;
    // Summed in a fixed (row-major) order for reproducibility.
    let total: f64 = flow.iter().zip(&cost).map(|(&f, &c)| f as f64 * c).sum();
    Ok(total / total_mass)
}

/// Balanced transportation problem on a complete bipartite graph.
///
/// Node layout for the shortest-path search: `0..np` prompt points,
/// `np..np+na` answer points, then the super source and super sink.
struct Transport<'a> {
    np: usize,
    na: usize,
    supply: u64,
    demand: u64,
    cost: &'a [f64],
    flow: Vec<u64>,
    sent: Vec<u64>,
    received: Vec<u64>,
}

impl<'a> Transport<'a> {
    fn new(np: usize, na: usize, supply: u64, demand: u64, cost: &'a [f64]) -> Self {
        Self {
            np,
            na,
            supply,
            demand,
            cost,
            flow: vec![0; np * na],
            sent: vec![0; np],
            received: vec![0; na],
        }
    }

    fn solve(mut self) -> Vec<u64> {
        let (np, na) = (self.np, self.na);
        let nodes = np + na + 2;
        let (src, sink) = (np + na, np + na + 1);
        let target = np as u64 * self.supply;
        let mut shipped = 0u64;
        let mut pot = vec![0.0f64; nodes];
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        let mut done = vec![false; nodes];

        while shipped < target {
            dist.fill(f64::INFINITY);
            prev.fill(usize::MAX);
            done.fill(false);
            dist[src] = 0.0;

            loop {
                let mut u = usize::MAX;
                let mut best = f64::INFINITY;
                for v in 0..nodes {
                    if !done[v] && dist[v] < best {
                        best = dist[v];
                        u = v;
                    }
                }
                if u == usize::MAX || u == sink {
                    break;
                }
                done[u] = true;
                let du = dist[u];
                let relax = |v: usize, c: f64, dist: &mut [f64], prev: &mut [usize]| {
                    // Reduced costs are non-negative in exact arithmetic; clamp
                    // rounding noise so Dijkstra stays valid.
                    let nd = du + (c + pot[u] - pot[v]).max(0.0);
                    if nd < dist[v] {
                        dist[v] = nd;
                        prev[v] = u;
                    }
                };
                if u == src {
                    for i in 0..np {
                        if self.sent[i] < self.supply {
                            relax(i, 0.0, &mut dist, &mut prev);
                        }
                    }
                } else if u < np {
                    for j in 0..na {
                        relax(np + j, self.cost[u * na + j], &mut dist, &mut prev);
                    }
                } else {
                    let j = u - np;
                    for i in 0..np {
                        if self.flow[i * na + j] > 0 {
                            relax(i, -self.cost[i * na + j], &mut dist, &mut prev);
                        }
                    }
                    if self.received[j] < self.demand {
                        relax(sink, 0.0, &mut dist, &mut prev);
                    }
                }
            }
            debug_assert!(dist[sink].is_finite(), "balanced problem always has an augmenting path");

            let reach = dist[sink];
            for v in 0..nodes {
                pot[v] += dist[v].min(reach);
            }

            // Bottleneck along the path.
            let mut delta = u64::MAX;
            let mut v = sink;
            while v != src {
                let u = prev[v];
                let cap = if u == src {
                    self.supply - self.sent[v]
                } else if v == sink {
                    self.demand - self.received[u - np]
                } else if u < np {
                    u64::MAX
                } else {
                    self.flow[v * na + (u - np)]
                };
                delta = delta.min(cap);
                v = u;
            }

            let mut v = sink;
            while v != src {
                let u = prev[v];
                if u == src {
                    self.sent[v] += delta;
                } else if v == sink {
                    self.received[u - np] += delta;
                } else if u < np {
                    self.flow[u * na + (v - np)] += delta;
                } else {
                    self.flow[v * na + (u - np)] -= delta;
                }
                v = u;
            }
            shipped += delta;
        }
        self.flow
    }
}

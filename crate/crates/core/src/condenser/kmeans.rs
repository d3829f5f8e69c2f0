//! Seeded K-means with k-means++ initialization and restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CondenseError;

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansConfig {
    pub max_iters: usize,
    pub tolerance: f64,
    pub restarts: usize,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self { max_iters: 100, tolerance: 1e-6, restarts: 4 }
    }
}

#[derive(Debug, Clone)]
pub struct KmeansOutcome {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index per input point.
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each Lloyd iteration of the winning restart;
    /// non-increasing by construction.
    pub inertia_trace: Vec<f64>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid of `point`, ties broken by lowest centroid index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// k-means++ seeding: D^2-weighted sampling. When every remaining point
/// coincides with a chosen centroid the leftover slots are filled with the
/// first unchosen indices, so `k` centroids always come back.
fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen: Vec<usize> = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
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
            match (0..n).find(|i| !chosen.contains(i)) {
                Some(i) => i,
                None => break,
            }
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            let d = squared_distance(p, &points[next]);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Moves points into empty clusters: the farthest member of the
/// highest-inertia donor cluster becomes the empty cluster's centroid.
/// Each move strictly reduces inertia once means are recomputed.
fn repair_empty_clusters(
    points: &[Vec<f64>],
    centroids: &mut [Vec<f64>],
    assignments: &mut [usize],
) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
        let mut cluster_inertia = vec![0.0f64; k];
        for (p, &a) in points.iter().zip(assignments.iter()) {
            cluster_inertia[a] += squared_distance(p, &centroids[a]);
        }
        // Only clusters with at least two members can donate a point.
        let donor = cluster_inertia
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[*i] >= 2)
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("k <= n guarantees a donor cluster");
        let farthest = assignments
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == donor)
            .max_by(|(i, _), (j, _)| {
                squared_distance(&points[*i], &centroids[donor])
                    .partial_cmp(&squared_distance(&points[*j], &centroids[donor]))
                    .unwrap()
                    .then(j.cmp(i))
            })
            .map(|(i, _)| i)
            .unwrap();
        assignments[farthest] = empty;
        centroids[empty] = points[farthest].clone();
    }
}

fn lloyd(
    points: &[Vec<f64>],
    k: usize,
    config: &KmeansConfig,
    rng: &mut ChaCha8Rng,
) -> KmeansOutcome {
    let dim = points[0].len();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut assignments = vec![0usize; points.len()];
    let mut trace = Vec::new();
    let mut prev_inertia = f64::INFINITY;

    for _ in 0..config.max_iters {
        for (i, p) in points.iter().enumerate() {
            assignments[i] = nearest(p, &centroids).0;
        }
        repair_empty_clusters(points, &mut centroids, &mut assignments);

        // Means update.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for (c, (sum, count)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
            for (cv, s) in c.iter_mut().zip(sum) {
                *cv = s / *count as f64;
            }
        }

        let inertia: f64 = points
            .iter()
            .zip(&assignments)
            .map(|(p, &a)| squared_distance(p, &centroids[a]))
            .sum();
        trace.push(inertia);
        if prev_inertia - inertia <= config.tolerance {
            break;
        }
        prev_inertia = inertia;
    }

    // Snap each point to its nearest centroid, but only on strict
    // improvement: ties must not undo empty-cluster repairs when centroids
    // coincide. Repair again in case a cluster lost all members.
    for (i, p) in points.iter().enumerate() {
        let (best, d_best) = nearest(p, &centroids);
        if d_best < squared_distance(p, &centroids[assignments[i]]) {
            assignments[i] = best;
        }
    }
    repair_empty_clusters(points, &mut centroids, &mut assignments);
    let inertia = points
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| squared_distance(p, &centroids[a]))
        .sum();
    KmeansOutcome { centroids, assignments, inertia, inertia_trace: trace }
}

/// Runs `config.restarts` seeded k-means++ restarts and keeps the outcome
/// with the lowest inertia (earliest restart wins ties).
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    config: &KmeansConfig,
    seed: u64,
) -> Result<KmeansOutcome, CondenseError> {
    if k == 0 {
        return Err(CondenseError::InvalidConfig("cluster count K must be positive".into()));
    }
    if points.is_empty() || k > points.len() {
        return Err(CondenseError::InvalidConfig(format!(
            "cluster count K={k} exceeds point count {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(CondenseError::InvalidConfig("points have mixed dimensions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KmeansOutcome> = None;
    for _ in 0..config.restarts.max(1) {
        let outcome = lloyd(points, k, config, &mut rng);
        if best.as_ref().map_or(true, |b| outcome.inertia < b.inertia) {
            best = Some(outcome);
        }
    }
    Ok(best.unwrap())
}

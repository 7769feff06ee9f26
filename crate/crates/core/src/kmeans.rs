//! Seeded K-means: k-means++ initialization plus Lloyd's iterations.
//!
//! Deterministic by construction: the initializer draws from a seeded
//! ChaCha stream, distance ties always resolve to the lowest centroid
//! index, and every summation runs in fixed point order. Two runs with the
//! same inputs and seed produce byte-identical assignments.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmeansParams {
    pub seed: u64,
    pub max_iters: usize,
    /// Stop when the largest centroid movement falls below this.
    pub tol: f64,
}

impl Default for KmeansParams {
    fn default() -> Self {
        Self {
            seed: 42,
            max_iters: 300,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansOutcome {
    /// Cluster index per point, consistent with the final centroids:
    /// no point is strictly closer to a centroid other than its own.
    pub assignments: Vec<u32>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after every assignment step,
    /// non-increasing from the first entry to the last.
    pub sse_history: Vec<f64>,
    pub requested_k: usize,
    /// May be lower than requested when the input has fewer distinct points.
    pub effective_k: usize,
    pub iterations: usize,
}

#[inline]
fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn point(points: &[f64], dim: usize, idx: usize) -> &[f64] {
    &points[idx * dim..(idx + 1) * dim]
}

fn count_distinct(points: &[f64], dim: usize, n: usize) -> usize {
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(n.min(1024));
    for i in 0..n {
        let key: Vec<u64> = point(points, dim, i).iter().map(|v| v.to_bits()).collect();
        seen.insert(key);
    }
    seen.len()
}

/// Nearest centroid by squared Euclidean distance; ties go to the lowest
/// centroid index (strict `<` keeps the earliest minimum).
fn nearest(feature: &[f64], centroids: &[Vec<f64>]) -> (u32, f64) {
    let mut best = 0u32;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = distance_sq(feature, centroid);
        if d < best_d {
            best_d = d;
            best = c as u32;
        }
    }
    (best, best_d)
}

/// k-means++: first centroid uniform, then each next centroid drawn with
/// probability proportional to the squared distance to the nearest chosen one.
fn kmeans_plus_plus(points: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len() / dim;
    let first = rng.gen_range(0..n);
    let mut centroids = vec![point(points, dim, first).to_vec()];
    let mut dist_sq: Vec<f64> = (0..n)
        .map(|i| distance_sq(point(points, dim, i), &centroids[0]))
        .collect();

    while centroids.len() < k {
        let total: f64 = dist_sq.iter().sum();
        if total <= 0.0 {
            break; // fewer distinct points than requested; caller already shrank k
        }
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &d) in dist_sq.iter().enumerate() {
            acc += d;
            if acc > target {
                chosen = Some(i);
                break;
            }
        }
        // Floating-point underrun: fall back to the last positive-weight point.
        let chosen = chosen.unwrap_or_else(|| {
            dist_sq
                .iter()
                .rposition(|&d| d > 0.0)
                .expect("total weight positive")
        });
        let new_centroid = point(points, dim, chosen).to_vec();
        for (i, slot) in dist_sq.iter_mut().enumerate() {
            let d = distance_sq(point(points, dim, i), &new_centroid);
            if d < *slot {
                *slot = d;
            }
        }
        centroids.push(new_centroid);
    }
    centroids
}

/// Run seeded K-means over `points` (flat row-major, `dim` values each).
///
/// When the input holds fewer distinct points than `k`, the cluster count
/// shrinks to the distinct count and the reduction is reported on the run
/// log. The returned assignment is always 1-nearest-centroid consistent.
pub fn kmeans(points: &[f64], dim: usize, k: usize, params: &KmeansParams) -> KmeansOutcome {
    assert!(dim > 0, "feature dimension must be positive");
    assert_eq!(points.len() % dim, 0, "point buffer must be a multiple of dim");
    let n = points.len() / dim;
    let requested_k = k.max(1);
    if n == 0 {
        return KmeansOutcome {
            assignments: Vec::new(),
            centroids: Vec::new(),
            sse_history: Vec::new(),
            requested_k,
            effective_k: 0,
            iterations: 0,
        };
    }

    let distinct = count_distinct(points, dim, n);
    let effective_k = requested_k.min(distinct);
    if effective_k < requested_k {
        log::warn!(
            "reducing cluster count from {requested_k} to {effective_k}: \
             only {distinct} distinct feature vectors"
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = kmeans_plus_plus(points, dim, effective_k, &mut rng);

    let mut assignments = vec![0u32; n];
    let mut sse_history = Vec::new();
    let mut sse = assign_all(points, dim, &centroids, &mut assignments);
    sse_history.push(sse);

    let mut iterations = 0;
    for _ in 0..params.max_iters {
        let movement = update_centroids(points, dim, &assignments, &mut centroids);
        // Reassign against the updated centroids so the final labeling is
        // always consistent with the final centroid set.
        let new_sse = assign_all(points, dim, &centroids, &mut assignments);
        debug_assert!(
            new_sse <= sse + 1e-9 * sse.max(1.0),
            "within-cluster SSE must not increase: {sse} -> {new_sse}"
        );
        sse = new_sse;
        sse_history.push(sse);
        iterations += 1;
        if movement < params.tol {
            break;
        }
    }

    KmeansOutcome {
        assignments,
        centroids,
        sse_history,
        requested_k,
        effective_k,
        iterations,
    }
}

fn assign_all(
    points: &[f64],
    dim: usize,
    centroids: &[Vec<f64>],
    assignments: &mut [u32],
) -> f64 {
    let mut sse = 0.0;
    for (i, slot) in assignments.iter_mut().enumerate() {
        let (c, d) = nearest(point(points, dim, i), centroids);
        *slot = c;
        sse += d;
    }
    sse
}

/// Move each centroid to the mean of its members; empty clusters stay put.
/// Returns the largest Euclidean movement.
fn update_centroids(
    points: &[f64],
    dim: usize,
    assignments: &[u32],
    centroids: &mut [Vec<f64>],
) -> f64 {
    let mut sums = vec![vec![0.0f64; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (i, &c) in assignments.iter().enumerate() {
        let f = point(points, dim, i);
        let sum = &mut sums[c as usize];
        for (s, v) in sum.iter_mut().zip(f) {
            *s += v;
        }
        counts[c as usize] += 1;
    }

    let mut max_movement: f64 = 0.0;
    for (c, centroid) in centroids.iter_mut().enumerate() {
        if counts[c] == 0 {
            continue;
        }
        let inv = 1.0 / counts[c] as f64;
        let mut movement_sq = 0.0;
        for (coord, s) in centroid.iter_mut().zip(&sums[c]) {
            let new = s * inv;
            let d = new - *coord;
            movement_sq += d * d;
            *coord = new;
        }
        max_movement = max_movement.max(movement_sq.sqrt());
    }
    max_movement
}

//! Lloyd's K-means with k-means++ seeding, and the silhouette score.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sq_dist, DenseMatrix, NumError};

pub const DEFAULT_MAX_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    /// k × dim
    pub centroids: DenseMatrix,
    pub inertia: f64,
    /// inertia after every assignment step, first entry from the initial centroids
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Members of each cluster, in point order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k()];
        for (i, &a) in self.assignments.iter().enumerate() {
            m[a].push(i);
        }
        m
    }
}

fn distinct_points(points: &DenseMatrix) -> usize {
    let mut idx: Vec<usize> = (0..points.rows()).collect();
    let cmp = |a: &usize, b: &usize| {
        points
            .row(*a)
            .iter()
            .zip(points.row(*b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    idx.sort_by(cmp);
    idx.dedup_by(|a, b| cmp(a, b).is_eq());
    idx.len()
}

fn nearest(point: &[f64], centroids: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &DenseMatrix, k: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let n = points.rows();
    let mut centroids = DenseMatrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    copy_row(&mut centroids, 0, points.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    chosen = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            chosen.unwrap_or(0)
        } else {
            0
        };
        copy_row(&mut centroids, c, points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(pick)));
        }
    }
    centroids
}

fn copy_row(m: &mut DenseMatrix, r: usize, values: &[f64]) {
    for (c, &v) in values.iter().enumerate() {
        m.set(r, c, v);
    }
}

/// Assigns every point to its nearest centroid, then moves the centroid of
/// each empty cluster onto the point farthest from its own centroid.
fn assign(points: &DenseMatrix, centroids: &mut DenseMatrix, out: &mut [usize]) -> f64 {
    let k = centroids.rows();
    let mut dists = vec![0.0; points.rows()];
    let mut sizes = vec![0usize; k];
    for i in 0..points.rows() {
        let (c, d) = nearest(points.row(i), centroids);
        out[i] = c;
        dists[i] = d;
        sizes[c] += 1;
    }
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let far = (0..points.rows())
            .filter(|&i| sizes[out[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
            .expect("k does not exceed the number of distinct points");
        copy_row(centroids, empty, points.row(far));
        sizes[out[far]] -= 1;
        sizes[empty] += 1;
        out[far] = empty;
        dists[far] = 0.0;
    }
    dists.iter().sum()
}

fn update(points: &DenseMatrix, assignments: &[usize], centroids: &mut DenseMatrix) {
    let (k, dim) = (centroids.rows(), centroids.cols());
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(points.row(i)) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..dim {
                centroids.set(c, j, sums[c * dim + j] / counts[c] as f64);
            }
        }
    }
}

/// Euclidean K-means. Stops at an assignment fixpoint or after `max_iters`
/// update steps.
pub fn kmeans(points: &DenseMatrix, k: usize, seed: u64, max_iters: usize) -> Result<Clustering, NumError> {
    let distinct = distinct_points(points);
    if k == 0 || k > distinct {
        return Err(NumError::TooFewPoints { k, distinct });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut assignments = vec![0; points.rows()];
    let mut inertia = assign(points, &mut centroids, &mut assignments);
    let mut history = vec![inertia];
    let mut iterations = 0;
    let mut next = assignments.clone();
    while iterations < max_iters {
        update(points, &assignments, &mut centroids);
        let new_inertia = assign(points, &mut centroids, &mut next);
        iterations += 1;
        debug_assert!(
            new_inertia <= inertia + 1e-9 * inertia.abs().max(1.0),
            "inertia rose from {inertia} to {new_inertia}"
        );
        history.push(new_inertia);
        inertia = new_inertia;
        if next == assignments {
            break;
        }
        std::mem::swap(&mut assignments, &mut next);
    }
    Ok(Clustering {
        assignments,
        centroids,
        inertia,
        inertia_history: history,
        iterations,
    })
}

/// Runs `n_init` seeded restarts and keeps the lowest inertia; ties keep the
/// earliest restart.
pub fn kmeans_best_of(
    points: &DenseMatrix,
    k: usize,
    seed: u64,
    max_iters: usize,
    n_init: usize,
) -> Result<Clustering, NumError> {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Clustering> = None;
    for _ in 0..n_init.max(1) {
        let run = kmeans(points, k, seeds.random(), max_iters)?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Mean silhouette over all points with Euclidean distance. Points alone in
/// their cluster score 0.
pub fn silhouette(points: &DenseMatrix, c: &Clustering) -> Result<f64, NumError> {
    if c.assignments.len() != points.rows() {
        return Err(NumError::Shape(format!(
            "{} assignments for {} points",
            c.assignments.len(),
            points.rows()
        )));
    }
    let members = c.members();
    let non_empty: Vec<&Vec<usize>> = members.iter().filter(|m| !m.is_empty()).collect();
    if non_empty.len() < 2 {
        return Err(NumError::TooFewClusters(non_empty.len()));
    }
    let dist = |i: usize, j: usize| sq_dist(points.row(i), points.row(j)).sqrt();
    let mut total = 0.0;
    for i in 0..points.rows() {
        let own = &members[c.assignments[i]];
        if own.len() == 1 {
            continue;
        }
        let a = own.iter().filter(|&&j| j != i).map(|&j| dist(i, j)).sum::<f64>() / (own.len() - 1) as f64;
        let b = members
            .iter()
            .enumerate()
            .filter(|(ci, m)| *ci != c.assignments[i] && !m.is_empty())
            .map(|(_, m)| m.iter().map(|&j| dist(i, j)).sum::<f64>() / m.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.rows() as f64)
}

//! Lloyd's K-means with k-means++ seeding, the comparison baseline.

use rand::Rng;

use crate::assignments::{Assignment, AssignmentTable};
use crate::embed::EmbeddingSet;
use crate::error::{invalid, Result};
use crate::rng;

pub const DEFAULT_MAX_ITERS: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// `k x dim`, row-major.
    pub centroids: Vec<f64>,
    pub k: usize,
    pub dim: usize,
    /// Confidence is `1 / (1 + d)` for distance `d` to the assigned centroid.
    pub assignments: AssignmentTable,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
}

impl KMeansResult {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid index (lowest on ties) and squared distance.
fn nearest(x: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(set: &EmbeddingSet, k: usize, rng: &mut rng::StageRng) -> Vec<f64> {
    let n = set.len();
    let dim = set.dim();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = set.row(first).to_vec();
    let mut d2: Vec<f64> = set.rows().map(|r| sq_dist(r, set.row(first))).collect();
    while centroids.len() < k * dim {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    acc += d;
                    pick = Some(i);
                    if acc > target {
                        break;
                    }
                }
            }
            pick.expect("positive mass")
        } else {
            // every remaining point coincides with a centroid
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let row = set.row(pick);
        centroids.extend_from_slice(row);
        for (d, r) in d2.iter_mut().zip(set.rows()) {
            *d = d.min(sq_dist(r, row));
        }
    }
    centroids
}

/// Clusters unit-norm rows into `k` groups.
///
/// An empty cluster is reseeded at the point farthest from its current
/// centroid. Iteration stops once no centroid moves by `tol` or more, or
/// after `max_iters` rounds.
pub fn kmeans(
    set: &EmbeddingSet,
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<KMeansResult> {
    set.require_normalized()?;
    if k == 0 || k > set.len() {
        return Err(invalid(format!(
            "k = {k} must satisfy 1 <= k <= {}",
            set.len()
        )));
    }
    let n = set.len();
    let dim = set.dim();
    let mut rng = rng::rng_from_seed(seed);
    let mut centroids = plus_plus(set, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0f64; n];
    let mut inertia_history = Vec::new();
    let mut iterations_run = 0;

    for _ in 0..max_iters {
        iterations_run += 1;
        for (i, r) in set.rows().enumerate() {
            (labels[i], dists[i]) = nearest(r, &centroids, dim);
        }
        repair_empty(set, &mut centroids, &mut labels, &mut dists, k);
        inertia_history.push(dists.iter().sum());

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, r) in set.rows().enumerate() {
            counts[labels[i]] += 1;
            sums[labels[i] * dim..(labels[i] + 1) * dim]
                .iter_mut()
                .zip(r)
                .for_each(|(s, x)| *s += x);
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            let new = &mut sums[c * dim..(c + 1) * dim];
            new.iter_mut().for_each(|v| *v /= counts[c] as f64);
            shift = shift.max(sq_dist(new, &centroids[c * dim..(c + 1) * dim]).sqrt());
        }
        centroids = sums;
        if shift < tol {
            break;
        }
    }

    for (i, r) in set.rows().enumerate() {
        (labels[i], dists[i]) = nearest(r, &centroids, dim);
    }
    let mut assignments = AssignmentTable::new();
    for (i, id) in set.ids().iter().enumerate() {
        assignments.insert(
            id.clone(),
            Assignment {
                cluster: labels[i],
                confidence: 1.0 / (1.0 + dists[i].sqrt()),
            },
        )?;
    }
    Ok(KMeansResult {
        centroids,
        k,
        dim,
        assignments,
        inertia: dists.iter().sum(),
        labels,
        iterations_run,
        inertia_history,
    })
}

/// Runs `restarts` independently seeded fits and keeps the lowest inertia
/// (the earliest on ties).
pub fn kmeans_restarts(
    set: &EmbeddingSet,
    k: usize,
    seed: u64,
    restarts: usize,
    max_iters: usize,
    tol: f64,
) -> Result<KMeansResult> {
    if restarts == 0 {
        return Err(invalid("need at least one restart"));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts {
        let run_seed = if r == 0 {
            seed
        } else {
            rng::stage_seed(seed, &format!("restart-{r}"))
        };
        let fit = kmeans(set, k, run_seed, max_iters, tol)?;
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn repair_empty(
    set: &EmbeddingSet,
    centroids: &mut [f64],
    labels: &mut [usize],
    dists: &mut [f64],
    k: usize,
) {
    let dim = set.dim();
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        // farthest point from its own centroid, among clusters that can spare one
        let Some(far) = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
        else {
            return;
        };
        centroids[empty * dim..(empty + 1) * dim].copy_from_slice(set.row(far));
        labels[far] = empty;
        dists[far] = 0.0;
    }
}

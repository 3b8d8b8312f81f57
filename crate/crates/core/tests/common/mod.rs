//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;

use tscan::corpus::GroundTruth;
use tscan::embed::{l2_normalize, EmbeddingSet};
use tscan::rng::rng_from_seed;
use tscan::scan::{scan_loss, ClusterHead};

/// Five states, every branch 1.0 except 0.7 / 0.3 out of state 1; the
/// branches meet again in state 3, so each state is visited about equally.
pub const BRANCHING_FSM: [[f64; 6]; 5] = [
    [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.7, 0.3, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
];

pub fn fsm_rows(m: &[[f64; 6]]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

/// Standard normal rows, unit-normalized.
pub fn random_unit_set(n: usize, dim: usize, seed: u64) -> EmbeddingSet {
    let mut rng = rng_from_seed(seed);
    let data: Vec<f64> = (0..n * dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let ids = (0..n).map(|i| format!("r{i:04}")).collect();
    l2_normalize(&EmbeddingSet::new(ids, dim, data).unwrap()).unwrap()
}

/// Ground truth with `sizes[s]` utterances in state `s`.
pub fn truth_with_sizes(sizes: &[usize]) -> GroundTruth {
    let mut t = GroundTruth::default();
    let mut n = 0;
    for (s, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            let id = format!("u{n:05}");
            t.state_of.insert(id.clone(), s);
            t.intent_of.insert(id, format!("intent{s}"));
            n += 1;
        }
    }
    t
}

/// Top-k indices of every row by full sort on (similarity desc, index asc).
pub fn brute_force_knn(set: &EmbeddingSet, k: usize) -> Vec<Vec<usize>> {
    (0..set.len())
        .map(|i| {
            let mut all: Vec<(f64, usize)> = (0..set.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let s: f64 = set.row(i).iter().zip(set.row(j)).map(|(a, b)| a * b).sum();
                    (s, j)
                })
                .collect();
            all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            all.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Lowest inertia over every labeling with exactly `k` non-empty groups,
/// centroids at group means.
pub fn exhaustive_kmeans_optimum(set: &EmbeddingSet, k: usize) -> f64 {
    let n = set.len();
    let dim = set.dim();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        if counts.iter().all(|&c| c > 0) {
            let mut sums = vec![0.0; k * dim];
            for (i, &l) in labels.iter().enumerate() {
                for d in 0..dim {
                    sums[l * dim + d] += set.row(i)[d];
                }
            }
            let mut inertia = 0.0;
            for (i, &l) in labels.iter().enumerate() {
                for d in 0..dim {
                    let c = sums[l * dim + d] / counts[l] as f64;
                    inertia += (set.row(i)[d] - c).powi(2);
                }
            }
            best = best.min(inertia);
        }
        // next labeling in base k
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

/// Largest total weight over all one-to-one row to column matchings,
/// by enumerating injections of the smaller side.
pub fn brute_force_matching(weights: &[Vec<f64>]) -> f64 {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    fn go(w: &[Vec<f64>], r: usize, used: &mut Vec<bool>, transpose: bool) -> f64 {
        let (rows, cols) = if transpose {
            (w[0].len(), w.len())
        } else {
            (w.len(), w[0].len())
        };
        if r == rows {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                let v = if transpose { w[c][r] } else { w[r][c] };
                best = best.max(v + go(w, r + 1, used, transpose));
                used[c] = false;
            }
        }
        best
    }
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    if rows <= cols {
        go(weights, 0, &mut vec![false; cols], false)
    } else {
        go(weights, 0, &mut vec![false; rows], true)
    }
}

fn batch_total(
    head: &ClusterHead,
    anchors: &[&[f64]],
    neighbors: &[&[f64]],
    entropy_weight: f64,
    eps: f64,
) -> f64 {
    let p: Vec<Vec<f64>> = anchors.iter().map(|x| head.probabilities(x)).collect();
    let q: Vec<Vec<f64>> = neighbors.iter().map(|x| head.probabilities(x)).collect();
    scan_loss(&p, &q, entropy_weight, eps).unwrap().total
}

/// Central differences of the batch loss over every weight, then every bias.
pub fn finite_difference_gradient(
    head: &ClusterHead,
    anchors: &[&[f64]],
    neighbors: &[&[f64]],
    entropy_weight: f64,
    eps: f64,
    h: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(head.weights().len() + head.bias().len());
    let mut probe = head.clone();
    for i in 0..head.weights().len() {
        let w = head.weights()[i];
        probe.weights_mut()[i] = w + h;
        let up = batch_total(&probe, anchors, neighbors, entropy_weight, eps);
        probe.weights_mut()[i] = w - h;
        let down = batch_total(&probe, anchors, neighbors, entropy_weight, eps);
        probe.weights_mut()[i] = w;
        out.push((up - down) / (2.0 * h));
    }
    for i in 0..head.bias().len() {
        let b = head.bias()[i];
        probe.bias_mut()[i] = b + h;
        let up = batch_total(&probe, anchors, neighbors, entropy_weight, eps);
        probe.bias_mut()[i] = b - h;
        let down = batch_total(&probe, anchors, neighbors, entropy_weight, eps);
        probe.bias_mut()[i] = b;
        out.push((up - down) / (2.0 * h));
    }
    out
}

/// Entrywise `|a - n| / max(|a|, |n|, floor)`, maximized.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// `|a - n| / |n|` in the Euclidean norm.
pub fn normwise_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum();
    let base: f64 = numeric.iter().map(|n| n * n).sum();
    (diff / base).sqrt()
}

/// Random head with standard normal weights and biases.
pub fn random_head(dim: usize, clusters: usize, seed: u64) -> ClusterHead {
    let mut rng = rng_from_seed(seed);
    let weights = (0..clusters * dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let bias = (0..clusters)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    ClusterHead::from_parts(clusters, dim, weights, bias).unwrap()
}

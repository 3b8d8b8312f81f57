//! Clustering head trained with the neighbor-consistency objective.
//!
//! The head is a linear map followed by a softmax over `C` clusters, applied
//! to frozen unit-norm embeddings. Training minimizes
//!
//! ```text
//! total = consistency - entropy_weight * entropy
//! consistency = mean_i -ln(clamp(<p_i, q_i>, eps, 1))
//! entropy     = H(mean_i p_i)
//! ```
//!
//! where `p_i` is the anchor's cluster distribution and `q_i` that of one of
//! its mined neighbors. Gradients are derived by hand and flow through both
//! the anchor and the neighbor branch, since the head is shared.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::assignments::{Assignment, AssignmentTable};
use crate::embed::{dot, parse_header, read_f32s, EmbeddingSet, FORMAT_VERSION};
use crate::error::{invalid, Error, Result};
use crate::neighbors::NeighborTable;
use crate::rng;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TSCH";
pub const DEFAULT_CLUSTERS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterHead {
    clusters: usize,
    dim: usize,
    /// `clusters x dim`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Uniform weights in `±1/sqrt(dim)`, zero bias.
pub fn init_head(dim: usize, clusters: usize, seed: u64) -> Result<ClusterHead> {
    if dim < 2 || clusters < 2 {
        return Err(invalid(format!(
            "head needs dim >= 2 and C >= 2, got dim={dim}, C={clusters}"
        )));
    }
    let bound = 1.0 / (dim as f64).sqrt();
    let mut rng = rng::rng_from_seed(seed);
    let weights = (0..clusters * dim)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Ok(ClusterHead {
        clusters,
        dim,
        weights,
        bias: vec![0.0; clusters],
    })
}

impl ClusterHead {
    pub fn from_parts(
        clusters: usize,
        dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if clusters < 2 || dim < 2 {
            return Err(invalid("head needs dim >= 2 and C >= 2"));
        }
        if weights.len() != clusters * dim || bias.len() != clusters {
            return Err(invalid(
                "head weight or bias length does not match its shape",
            ));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite head parameter".into()));
        }
        Ok(ClusterHead {
            clusters,
            dim,
            weights,
            bias,
        })
    }

    pub fn zeros(dim: usize, clusters: usize) -> Result<Self> {
        Self::from_parts(
            clusters,
            dim,
            vec![0.0; clusters * dim],
            vec![0.0; clusters],
        )
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            })
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .zip(&self.bias)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }

    /// Softmax cluster distribution of one embedding.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.logits(x);
        softmax_in_place(&mut z);
        z
    }

    /// Weights and bias rounded through `f32`, as a checkpoint stores them.
    pub fn quantized(&self) -> Self {
        let q = |v: &f64| *v as f32 as f64;
        ClusterHead {
            clusters: self.clusters,
            dim: self.dim,
            weights: self.weights.iter().map(q).collect(),
            bias: self.bias.iter().map(q).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * (self.weights.len() + self.bias.len()));
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.clusters as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in self.weights.iter().chain(&self.bias) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (clusters, dim, payload) = parse_header(bytes, CHECKPOINT_MAGIC)?;
        if payload.len() != 4 * (clusters * dim + clusters) {
            return Err(Error::Format(format!(
                "payload length mismatch: header says C={clusters}, dim={dim}, payload has {} bytes",
                payload.len()
            )));
        }
        let mut values = read_f32s(payload);
        let bias = values.split_off(clusters * dim);
        Self::from_parts(clusters, dim, values, bias)
    }
}

pub fn read_head(path: impl AsRef<Path>) -> Result<ClusterHead> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ClusterHead::from_bytes(&bytes)
}

pub fn write_head(head: &ClusterHead, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, head.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Numerically stable softmax (max subtracted before exponentiation).
pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

/// Cluster distributions for every row of `set`.
pub fn forward(head: &ClusterHead, set: &EmbeddingSet) -> Result<Vec<Vec<f64>>> {
    head.check_dim(set.dim())?;
    Ok(set.rows().map(|r| head.probabilities(r)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub entropy_weight: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Floor applied to probabilities and similarities before taking logs.
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            entropy_weight: 5.0,
            learning_rate: 1e-4,
            batch_size: 128,
            epochs: 100,
            seed: 0,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.entropy_weight >= 0.0 && self.entropy_weight.is_finite()) {
            return Err(invalid("entropy_weight must be finite and >= 0"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be > 0"));
        }
        if self.batch_size < 2 {
            return Err(invalid("batch_size must be >= 2"));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be >= 1"));
        }
        if !(self.eps > 0.0 && self.eps <= 1e-4) {
            return Err(invalid("eps must lie in (0, 1e-4]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub consistency: f64,
    pub entropy: f64,
    pub total: f64,
}

fn check_probability_rows(rows: &[Vec<f64>], clusters: usize, what: &str) -> Result<()> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != clusters {
            return Err(invalid(format!(
                "{what} row {i} has {} entries, expected {clusters}",
                r.len()
            )));
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || r.iter().any(|p| *p < 0.0) {
            return Err(invalid(format!(
                "{what} row {i} is not a probability vector (sum {sum})"
            )));
        }
    }
    Ok(())
}

fn mean_row(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; rows[0].len()];
    for r in rows {
        m.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    let b = rows.len() as f64;
    m.iter_mut().for_each(|v| *v /= b);
    m
}

fn entropy_clamped(m: &[f64], eps: f64) -> f64 {
    -m.iter().map(|&v| v * v.clamp(eps, 1.0).ln()).sum::<f64>()
}

/// Loss of a batch of anchor and neighbor distributions.
pub fn scan_loss(
    anchor_probs: &[Vec<f64>],
    neighbor_probs: &[Vec<f64>],
    entropy_weight: f64,
    eps: f64,
) -> Result<LossBreakdown> {
    if anchor_probs.is_empty() || anchor_probs.len() != neighbor_probs.len() {
        return Err(invalid(format!(
            "anchor batch has {} rows, neighbor batch {}",
            anchor_probs.len(),
            neighbor_probs.len()
        )));
    }
    let clusters = anchor_probs[0].len();
    check_probability_rows(anchor_probs, clusters, "anchor")?;
    check_probability_rows(neighbor_probs, clusters, "neighbor")?;
    Ok(loss_unchecked(
        anchor_probs,
        neighbor_probs,
        entropy_weight,
        eps,
    ))
}

fn loss_unchecked(
    anchor: &[Vec<f64>],
    neighbor: &[Vec<f64>],
    entropy_weight: f64,
    eps: f64,
) -> LossBreakdown {
    let b = anchor.len() as f64;
    let consistency = anchor
        .iter()
        .zip(neighbor)
        .map(|(p, q)| -dot(p, q).clamp(eps, 1.0).ln())
        .sum::<f64>()
        / b;
    let entropy = entropy_clamped(&mean_row(anchor), eps);
    LossBreakdown {
        consistency,
        entropy,
        total: consistency - entropy_weight * entropy,
    }
}

/// Gradient of a scalar loss with respect to head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl HeadGradient {
    pub fn zeros(head: &ClusterHead) -> Self {
        HeadGradient {
            weights: vec![0.0; head.weights.len()],
            bias: vec![0.0; head.clusters],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights.iter().chain(&self.bias).copied()
    }

    /// Backpropagates `d loss / d p` through the softmax into the parameters.
    fn accumulate(&mut self, x: &[f64], probs: &[f64], grad_probs: &[f64]) {
        let inner = dot(grad_probs, probs);
        let dim = x.len();
        for (c, (&p, &g)) in probs.iter().zip(grad_probs).enumerate() {
            let dz = p * (g - inner);
            self.bias[c] += dz;
            let row = &mut self.weights[c * dim..(c + 1) * dim];
            row.iter_mut().zip(x).for_each(|(w, xi)| *w += dz * xi);
        }
    }
}

/// Analytic gradient of `total` over one batch, together with the loss.
pub fn scan_loss_grad(
    head: &ClusterHead,
    anchors: &[&[f64]],
    neighbors: &[&[f64]],
    config: &TrainConfig,
) -> Result<(HeadGradient, LossBreakdown)> {
    if anchors.is_empty() || anchors.len() != neighbors.len() {
        return Err(invalid(
            "anchor and neighbor batches must be non-empty and equal in size",
        ));
    }
    for x in anchors.iter().chain(neighbors) {
        head.check_dim(x.len())?;
    }
    Ok(grad_unchecked(
        head,
        anchors,
        neighbors,
        config.entropy_weight,
        config.eps,
    ))
}

fn grad_unchecked(
    head: &ClusterHead,
    anchors: &[&[f64]],
    neighbors: &[&[f64]],
    entropy_weight: f64,
    eps: f64,
) -> (HeadGradient, LossBreakdown) {
    let b = anchors.len() as f64;
    let p: Vec<Vec<f64>> = anchors.iter().map(|x| head.probabilities(x)).collect();
    let q: Vec<Vec<f64>> = neighbors.iter().map(|x| head.probabilities(x)).collect();
    let loss = loss_unchecked(&p, &q, entropy_weight, eps);

    // d(-entropy)/dp_ic = -(1/B) dH/dm_c, with the clamp's flat region below eps
    let m = mean_row(&p);
    let entropy_grad: Vec<f64> = m
        .iter()
        .map(|&mc| {
            let dh_dm = if mc > eps {
                -(mc.ln() + 1.0)
            } else {
                -eps.ln()
            };
            -entropy_weight * dh_dm / b
        })
        .collect();

    let mut grad = HeadGradient::zeros(head);
    let mut gp = vec![0.0; head.clusters];
    let mut gq = vec![0.0; head.clusters];
    for i in 0..anchors.len() {
        let s = dot(&p[i], &q[i]);
        let ds = if s > eps { -1.0 / (b * s) } else { 0.0 };
        for c in 0..head.clusters {
            gp[c] = ds * q[i][c] + entropy_grad[c];
            gq[c] = ds * p[i][c];
        }
        grad.accumulate(anchors[i], &p[i], &gp);
        grad.accumulate(neighbors[i], &q[i], &gq);
    }
    (grad, loss)
}

/// First/second-moment adaptive optimizer with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(head: &ClusterHead, learning_rate: f64) -> Self {
        let n = head.weights.len() + head.bias.len();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn update(&mut self, head: &mut ClusterHead, grad: &HeadGradient) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let params = head.weights.iter_mut().chain(head.bias.iter_mut());
        for (((w, g), m), v) in params.zip(grad.iter()).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *w -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
    }
}

/// Result of [`train`]: the head and the epoch-mean losses.
#[derive(Debug, Clone)]
pub struct Trained {
    pub head: ClusterHead,
    pub history: Vec<LossBreakdown>,
}

/// Mini-batch training over shuffled anchors, each paired with one neighbor
/// drawn uniformly from its mined set.
pub fn train(
    set: &EmbeddingSet,
    table: &NeighborTable,
    clusters: usize,
    config: &TrainConfig,
) -> Result<Trained> {
    config.validate()?;
    if set.is_empty() {
        return Err(invalid("empty embedding set"));
    }
    set.require_normalized()?;
    if clusters > set.len() {
        return Err(invalid(format!(
            "C = {clusters} exceeds the {} embeddings",
            set.len()
        )));
    }
    if table.len() != set.len() {
        return Err(invalid(format!(
            "neighbor table has {} rows for {} embeddings",
            table.len(),
            set.len()
        )));
    }
    let mut head = init_head(set.dim(), clusters, config.seed)?;
    let mut opt = Adam::new(&head, config.learning_rate);
    let mut rng = rng::rng_from_seed(rng::stage_seed(config.seed, "scan-batches"));
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            if batch.len() < 2 {
                continue;
            }
            let anchors: Vec<&[f64]> = batch.iter().map(|&i| set.row(i)).collect();
            let neighbors: Vec<&[f64]> = batch
                .iter()
                .map(|&i| {
                    let row = table.neighbors(i);
                    set.row(row[rng.random_range(0..row.len())].index)
                })
                .collect();
            let (grad, loss) = grad_unchecked(
                &head,
                &anchors,
                &neighbors,
                config.entropy_weight,
                config.eps,
            );
            opt.update(&mut head, &grad);
            sum.consistency += loss.consistency;
            sum.entropy += loss.entropy;
            sum.total += loss.total;
            batches += 1;
        }
        if !head.is_finite() || !sum.total.is_finite() {
            return Err(Error::Numeric(format!(
                "training diverged in epoch {}",
                epoch + 1
            )));
        }
        let n = batches.max(1) as f64;
        history.push(LossBreakdown {
            consistency: sum.consistency / n,
            entropy: sum.entropy / n,
            total: sum.total / n,
        });
    }
    Ok(Trained { head, history })
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Most probable cluster of every row with its probability.
pub fn assign(head: &ClusterHead, set: &EmbeddingSet) -> Result<AssignmentTable> {
    let probs = forward(head, set)?;
    let mut table = AssignmentTable::new();
    for (id, p) in set.ids().iter().zip(probs) {
        let cluster = argmax(&p);
        table.insert(
            id.clone(),
            Assignment {
                cluster,
                confidence: p[cluster],
            },
        )?;
    }
    Ok(table)
}

/// `epoch<TAB>consistency<TAB>entropy<TAB>total`, epochs numbered from 1.
pub fn history_to_text(history: &[LossBreakdown]) -> String {
    let mut out = String::new();
    for (i, l) in history.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}",
            i + 1,
            l.consistency,
            l.entropy,
            l.total
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_head(4, 3, 42).unwrap();
        assert_eq!(a, init_head(4, 3, 42).unwrap());
        assert_ne!(a, init_head(4, 3, 43).unwrap());
        assert_eq!(a.weights().len(), 12);
        assert!(a.weights().iter().all(|w| w.abs() <= 0.5));
        assert!(a.bias().iter().all(|&b| b == 0.0));
        assert!(init_head(1, 3, 0).is_err());
        assert!(init_head(4, 1, 0).is_err());
    }

    #[test]
    fn zero_head_is_uniform() {
        let head = ClusterHead::zeros(3, 4).unwrap();
        let p = head.probabilities(&[0.3, -0.2, 0.9]);
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn dominant_bias_wins() {
        let mut head = ClusterHead::zeros(2, 3).unwrap();
        head.bias_mut()[0] = 10.0;
        let p = head.probabilities(&[1.0, 0.0]);
        assert_eq!(argmax(&p), 0);
        assert!(p[0] > 0.99);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let mut a = vec![0.3, -1.2, 2.5, 0.0];
        let mut b: Vec<f64> = a.iter().map(|v| v + 123.456).collect();
        softmax_in_place(&mut a);
        softmax_in_place(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut big = vec![1000.0, 999.0];
        softmax_in_place(&mut big);
        assert!(big.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        let head = ClusterHead::zeros(3, 2).unwrap();
        let set = EmbeddingSet::new(vec!["a".into()], 2, vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            forward(&head, &set),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn loss_of_perfect_agreement_is_zero() {
        let l = scan_loss(&[vec![1.0, 0.0]], &[vec![1.0, 0.0]], 3.0, 1e-8).unwrap();
        assert_eq!(l.consistency, 0.0);
        assert_eq!(l.entropy, 0.0);
        assert_eq!(l.total, 0.0);
    }

    #[test]
    fn loss_of_uniform_pair() {
        let half = vec![0.5, 0.5];
        let l = scan_loss(
            std::slice::from_ref(&half),
            std::slice::from_ref(&half),
            2.0,
            1e-8,
        )
        .unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((l.consistency - ln2).abs() < 1e-12);
        assert!((l.entropy - ln2).abs() < 1e-12);
        assert!((l.total + ln2).abs() < 1e-12);
        assert!((l.total - (l.consistency - 2.0 * l.entropy)).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_predictions_clamp() {
        let l = scan_loss(&[vec![1.0, 0.0]], &[vec![0.0, 1.0]], 0.0, 1e-8).unwrap();
        assert!((l.consistency + (1e-8f64).ln()).abs() < 1e-9);
        assert!(l.consistency.is_finite());
    }

    #[test]
    fn loss_validates_inputs() {
        assert!(scan_loss(&[vec![0.5, 0.5]], &[], 1.0, 1e-8).is_err());
        assert!(scan_loss(&[vec![0.5, 0.6]], &[vec![0.5, 0.5]], 1.0, 1e-8).is_err());
        assert!(scan_loss(&[vec![0.5, 0.5]], &[vec![1.0, 0.0, 0.0]], 1.0, 1e-8).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let head = init_head(5, 3, 1).unwrap().quantized();
        let bytes = head.to_bytes();
        assert_eq!(&bytes[..4], b"TSCH");
        assert_eq!(bytes.len(), 16 + 4 * (15 + 3));
        let back = ClusterHead::from_bytes(&bytes).unwrap();
        assert_eq!(back, head);
        assert_eq!(back.to_bytes(), bytes);
        assert!(ClusterHead::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn assign_ties_and_dominance() {
        let set =
            EmbeddingSet::new(vec!["a".into(), "b".into()], 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let zero = ClusterHead::zeros(2, 4).unwrap();
        let t = assign(&zero, &set).unwrap();
        for (_, a) in t.iter() {
            assert_eq!(a.cluster, 0);
            assert!((a.confidence - 0.25).abs() < 1e-12);
        }
        let mut dom = ClusterHead::zeros(2, 4).unwrap();
        dom.bias_mut()[0] = 10.0;
        let t = assign(&dom, &set).unwrap();
        assert!(t.iter().all(|(_, a)| a.cluster == 0 && a.confidence > 0.99));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            eps: 1e-3,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 1,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn history_format() {
        let h = [LossBreakdown {
            consistency: 1.0,
            entropy: 0.5,
            total: -1.5,
        }];
        assert_eq!(history_to_text(&h), "1\t1.000000\t0.500000\t-1.500000\n");
    }
}

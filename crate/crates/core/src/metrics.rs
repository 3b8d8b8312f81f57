//! Cluster-quality measures: membership balance, per-intent spread, and
//! matched accuracy against known states.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use indexmap::IndexMap;

use crate::assignments::AssignmentTable;
use crate::corpus::GroundTruth;
use crate::error::{invalid, Error, Result};

/// Balance of cluster sizes as `sum x ln x` over membership ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionReport {
    pub score: f64,
    /// `ln(1/C)`, the score of perfectly even clusters.
    pub ideal: f64,
    /// `score - ideal`; zero when perfectly balanced.
    pub deviation: f64,
    pub cluster_sizes: Vec<usize>,
}

/// Balance score from raw cluster sizes; empty clusters contribute 0.
pub fn distribution_from_sizes(sizes: &[usize]) -> Result<DistributionReport> {
    if sizes.is_empty() {
        return Err(invalid("need at least one cluster"));
    }
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(invalid("no assignments to score"));
    }
    let n = total as f64;
    let score = sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let x = s as f64 / n;
            x * x.ln()
        })
        .sum::<f64>();
    let ideal = (1.0 / sizes.len() as f64).ln();
    Ok(DistributionReport {
        score,
        ideal,
        deviation: score - ideal,
        cluster_sizes: sizes.to_vec(),
    })
}

pub fn distribution_score(
    assignments: &AssignmentTable,
    clusters: usize,
) -> Result<DistributionReport> {
    if clusters == 0 {
        return Err(invalid("C must be at least 1"));
    }
    distribution_from_sizes(&assignments.cluster_sizes(clusters)?)
}

/// Summary statistics of a sample of counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DescribeStats {
    pub nobs: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    /// Unbiased (n - 1); 0 below two observations.
    pub variance: f64,
    /// Biased Fisher-Pearson g1; 0 below three observations or with no spread.
    pub skewness: f64,
    /// Biased excess kurtosis g2; 0 below four observations or with no spread.
    pub kurtosis: f64,
}

impl DescribeStats {
    /// Square root of the unbiased variance.
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn of(counts: &[usize]) -> Option<Self> {
        let nobs = counts.len();
        if nobs == 0 {
            return None;
        }
        let n = nobs as f64;
        let mean = counts.iter().sum::<usize>() as f64 / n;
        let central = |p: i32| {
            counts
                .iter()
                .map(|&c| (c as f64 - mean).powi(p))
                .sum::<f64>()
                / n
        };
        let m2 = central(2);
        let variance = if nobs >= 2 { m2 * n / (n - 1.0) } else { 0.0 };
        let skewness = if nobs >= 3 && m2 > 0.0 {
            central(3) / m2.powf(1.5)
        } else {
            0.0
        };
        let kurtosis = if nobs >= 4 && m2 > 0.0 {
            central(4) / (m2 * m2) - 3.0
        } else {
            0.0
        };
        Some(DescribeStats {
            nobs,
            min: *counts.iter().min().expect("non-empty"),
            max: *counts.iter().max().expect("non-empty"),
            mean,
            variance,
            skewness,
            kurtosis,
        })
    }
}

impl fmt::Display for DescribeStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "nobs={}, minmax=({}, {}), mean={:.2}, variance={:.2}, skewness={:.2}, kurtosis={:.2}",
            self.nobs, self.min, self.max, self.mean, self.variance, self.skewness, self.kurtosis
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentStats {
    /// Over clusters holding at least one member of the intent.
    pub nonzero: DescribeStats,
    /// Over all `C` clusters, zeros included.
    pub all_clusters: DescribeStats,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntentConfidenceReport {
    pub intents: BTreeMap<String, IntentStats>,
}

impl IntentConfidenceReport {
    /// One block per intent in the layout
    /// `nobs=8, minmax=(6, 43), mean=12.12, variance=162.98, ...`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (intent, s) in &self.intents {
            let _ = writeln!(out, "intent: {intent}");
            let _ = writeln!(out, "    {}", s.nonzero);
            let _ = writeln!(out, "    all clusters: {}", s.all_clusters);
        }
        out
    }

    /// `intent<TAB>nobs<TAB>min<TAB>max<TAB>mean<TAB>std<TAB>variance<TAB>skewness<TAB>kurtosis`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (intent, s) in &self.intents {
            let d = &s.nonzero;
            let _ = writeln!(
                out,
                "{intent}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                d.nobs,
                d.min,
                d.max,
                d.mean,
                d.std_dev(),
                d.variance,
                d.skewness,
                d.kurtosis
            );
        }
        out
    }
}

/// How each annotated intent spreads over clusters.
pub fn intent_confidence(
    assignments: &AssignmentTable,
    annotations: &IndexMap<String, String>,
    clusters: usize,
) -> Result<IntentConfidenceReport> {
    let mut counts: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (id, intent) in annotations {
        let a = assignments.get(id).ok_or_else(|| Error::Missing {
            what: "cluster assignment",
            id: id.clone(),
        })?;
        if a.cluster >= clusters {
            return Err(invalid(format!(
                "cluster {} of {id:?} is >= C = {clusters}",
                a.cluster
            )));
        }
        counts
            .entry(intent.clone())
            .or_insert_with(|| vec![0; clusters])[a.cluster] += 1;
    }
    let intents = counts
        .into_iter()
        .map(|(intent, counts)| {
            let nonzero: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
            let stats = IntentStats {
                nonzero: DescribeStats::of(&nonzero).expect("intent has a member"),
                all_clusters: DescribeStats::of(&counts).expect("C >= 1"),
                counts,
            };
            (intent, stats)
        })
        .collect();
    Ok(IntentConfidenceReport { intents })
}

/// Maximum-weight assignment on a rectangular weight matrix.
///
/// Returns, for every row, the matched column (`None` when there are more
/// rows than columns and the row is left over). O(n^3) shortest augmenting
/// paths on the square zero-padded cost matrix.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if n == 0 {
        return Vec::new();
    }
    let max_w = weights.iter().flatten().copied().fold(0.0f64, f64::max);
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            max_w - weights[i][j]
        } else {
            max_w
        }
    };
    // potentials u (rows), v (cols); p[j] = row matched to column j, 1-based
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut matched = vec![None; rows];
    for (j, &i) in p.iter().enumerate().skip(1) {
        if i >= 1 && i <= rows && j <= cols {
            matched[i - 1] = Some(j - 1);
        }
    }
    matched
}

/// Contingency counts `[state][cluster]` over utterances present in both.
pub fn contingency(
    assignments: &AssignmentTable,
    truth: &GroundTruth,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let states = truth.num_states();
    let clusters = assignments.cluster_bound();
    let mut table = vec![vec![0.0; clusters]; states];
    for (id, a) in assignments.iter() {
        let &s = truth.state_of.get(id).ok_or_else(|| Error::Missing {
            what: "ground-truth state",
            id: id.to_string(),
        })?;
        table[s][a.cluster] += 1.0;
    }
    Ok((table, assignments.len()))
}

/// Best one-to-one cluster to state mapping (`mapping[state] = cluster`).
pub fn match_clusters(
    assignments: &AssignmentTable,
    truth: &GroundTruth,
) -> Result<Vec<Option<usize>>> {
    let (table, _) = contingency(assignments, truth)?;
    Ok(max_weight_matching(&table))
}

/// Fraction of utterances whose cluster is matched to their true state
/// under the best one-to-one matching.
pub fn alignment_accuracy(assignments: &AssignmentTable, truth: &GroundTruth) -> Result<f64> {
    if assignments.is_empty() {
        return Err(invalid("no assignments to align"));
    }
    let (table, n) = contingency(assignments, truth)?;
    let matched: f64 = max_weight_matching(&table)
        .iter()
        .enumerate()
        .filter_map(|(s, c)| c.map(|c| table[s][c]))
        .sum();
    Ok(matched / n as f64)
}

//! Self-labeling: confident pseudo-label fine-tuning and prototype mining.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::assignments::AssignmentTable;
use crate::corpus::Corpus;
use crate::embed::EmbeddingSet;
use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::scan::{argmax, forward, Adam, ClusterHead, HeadGradient, TrainConfig};

pub const DEFAULT_THRESHOLD: f64 = 0.99;
pub const DEFAULT_ITERATIONS: usize = 5;

/// Bijective base-26 name: 0 -> "a", 25 -> "z", 26 -> "aa".
pub fn cluster_letter(index: usize) -> String {
    let mut n = index + 1;
    let mut out = Vec::new();
    while n > 0 {
        n -= 1;
        out.push(b'a' + (n % 26) as u8);
        n /= 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Inverse of [`cluster_letter`].
pub fn parse_letter(name: &str) -> Option<usize> {
    if name.is_empty() || !name.bytes().all(|b| b.is_ascii_lowercase()) {
        return None;
    }
    let mut n = 0usize;
    for b in name.bytes() {
        n = n.checked_mul(26)?.checked_add((b - b'a') as usize + 1)?;
    }
    Some(n - 1)
}

/// How cluster ids map to node names.
///
/// With per-role clustering, agent clusters occupy ids `0..C` and user
/// clusters `C..2C`; their names carry an `A` or `U` prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Naming {
    Joint,
    PerRole { clusters_per_role: usize },
}

impl Naming {
    pub fn name(&self, cluster: usize) -> String {
        match *self {
            Naming::Joint => cluster_letter(cluster),
            Naming::PerRole { clusters_per_role } => {
                if cluster < clusters_per_role {
                    format!("A{}", cluster_letter(cluster))
                } else {
                    format!("U{}", cluster_letter(cluster - clusters_per_role))
                }
            }
        }
    }

    pub fn parse(&self, name: &str) -> Option<usize> {
        match *self {
            Naming::Joint => parse_letter(name),
            Naming::PerRole { clusters_per_role } => {
                let (offset, rest) = match name.split_at_checked(1)? {
                    ("A", rest) => (0, rest),
                    ("U", rest) => (clusters_per_role, rest),
                    _ => return None,
                };
                let i = parse_letter(rest)?;
                (i < clusters_per_role).then_some(i + offset)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabel {
    pub cluster: usize,
    pub letter: String,
    pub prototype_id: Option<String>,
    pub prototype_text: Option<String>,
    /// Confidence of the prototype; 0 for an empty cluster.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterLabels {
    pub labels: Vec<ClusterLabel>,
}

impl ClusterLabels {
    pub fn by_cluster(&self, cluster: usize) -> Option<&ClusterLabel> {
        self.labels.iter().find(|l| l.cluster == cluster)
    }

    /// `letter<TAB>cluster_id<TAB>prototype_id<TAB>prototype_text`; absent
    /// prototypes leave the last two fields empty.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for l in &self.labels {
            let text = l
                .prototype_text
                .as_deref()
                .unwrap_or("")
                .replace(['\t', '\n', '\r'], " ");
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                l.letter,
                l.cluster,
                l.prototype_id.as_deref().unwrap_or(""),
                text
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut labels = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let bad = |msg: &str| Error::Parse {
                line: n + 1,
                msg: msg.to_string(),
            };
            let mut parts = line.splitn(4, '\t');
            let (Some(letter), Some(cluster), Some(id), Some(text)) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected four tab-separated fields"));
            };
            let cluster = cluster.parse().map_err(|_| bad("bad cluster id"))?;
            let some = |s: &str| (!s.is_empty()).then(|| s.to_string());
            labels.push(ClusterLabel {
                cluster,
                letter: letter.to_string(),
                prototype_id: some(id),
                prototype_text: some(text),
                confidence: 0.0,
            });
        }
        Ok(ClusterLabels { labels })
    }
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<ClusterLabels> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ClusterLabels::from_text(&text)
}

pub fn write_labels(labels: &ClusterLabels, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, labels.to_text()).map_err(|e| Error::io(path, e))
}

/// Picks the most confident member of each cluster as its readable label.
pub fn extract_prototypes(
    assignments: &AssignmentTable,
    corpus: &Corpus,
    clusters: usize,
) -> Result<ClusterLabels> {
    extract_prototypes_named(assignments, corpus, clusters, Naming::Joint)
}

pub fn extract_prototypes_named(
    assignments: &AssignmentTable,
    corpus: &Corpus,
    clusters: usize,
    naming: Naming,
) -> Result<ClusterLabels> {
    let index = corpus.index();
    let mut best: Vec<Option<(&str, f64)>> = vec![None; clusters];
    for (id, a) in assignments.iter() {
        if !index.contains_key(id) {
            return Err(Error::Missing {
                what: "corpus utterance",
                id: id.to_string(),
            });
        }
        let slot = best.get_mut(a.cluster).ok_or_else(|| {
            invalid(format!(
                "cluster {} of {id:?} is >= C = {clusters}",
                a.cluster
            ))
        })?;
        let better = match *slot {
            None => true,
            Some((bid, bconf)) => a.confidence > bconf || (a.confidence == bconf && id < bid),
        };
        if better {
            *slot = Some((id, a.confidence));
        }
    }
    let labels = best
        .into_iter()
        .enumerate()
        .map(|(cluster, b)| ClusterLabel {
            cluster,
            letter: naming.name(cluster),
            prototype_id: b.map(|(id, _)| id.to_string()),
            prototype_text: b.map(|(id, _)| index[id].text.clone()),
            confidence: b.map_or(0.0, |(_, c)| c),
        })
        .collect();
    Ok(ClusterLabels { labels })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfLabelStep {
    /// Rows at or above the threshold when the iteration started.
    pub selected: usize,
    /// Mean max-probability over all rows after the iteration.
    pub mean_confidence: f64,
}

#[derive(Debug, Clone)]
pub struct SelfLabelOutcome {
    pub head: ClusterHead,
    pub initial_mean_confidence: f64,
    pub steps: Vec<SelfLabelStep>,
}

fn mean_confidence(probs: &[Vec<f64>]) -> f64 {
    probs.iter().map(|p| p[argmax(p)]).sum::<f64>() / probs.len() as f64
}

/// Iteratively fine-tunes on confident pseudo-labels.
///
/// Each iteration fixes the argmax of every row whose top probability is at
/// least `threshold` as its label and runs one epoch of cross-entropy updates
/// with class-balanced sampling. If nothing is confident in the first
/// iteration the call fails; later empty iterations end the loop.
pub fn fine_tune_confident(
    head: &ClusterHead,
    set: &EmbeddingSet,
    threshold: f64,
    iterations: usize,
    config: &TrainConfig,
) -> Result<SelfLabelOutcome> {
    config.validate()?;
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(invalid(format!(
            "self-label threshold {threshold} must be finite and >= 0"
        )));
    }
    let mut head = head.clone();
    let initial = forward(&head, set)?;
    let initial_mean_confidence = mean_confidence(&initial);
    let mut opt = Adam::new(&head, config.learning_rate);
    let mut rng = rng::rng_from_seed(rng::stage_seed(config.seed, "self-label"));
    let mut steps = Vec::with_capacity(iterations);
    let mut probs = initial;

    for iteration in 0..iterations {
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, p) in probs.iter().enumerate() {
            let c = argmax(p);
            if p[c] >= threshold {
                groups.entry(c).or_default().push(i);
            }
        }
        let selected: usize = groups.values().map(Vec::len).sum();
        if selected == 0 {
            if iteration == 0 {
                return Err(invalid(format!(
                    "threshold too high: no row reaches {threshold}"
                )));
            }
            break;
        }
        let mut classes: Vec<(usize, Vec<usize>)> = groups.into_iter().collect();
        classes.sort_unstable_by_key(|(c, _)| *c);

        let batches = selected.div_ceil(config.batch_size);
        for _ in 0..batches {
            let mut grad = HeadGradient::zeros(&head);
            let scale = 1.0 / config.batch_size as f64;
            for _ in 0..config.batch_size {
                let (label, members) = &classes[rng.random_range(0..classes.len())];
                let row = set.row(members[rng.random_range(0..members.len())]);
                let p = head.probabilities(row);
                let dim = row.len();
                for (c, &pc) in p.iter().enumerate() {
                    let dz = scale * (pc - if c == *label { 1.0 } else { 0.0 });
                    grad.bias[c] += dz;
                    grad.weights[c * dim..(c + 1) * dim]
                        .iter_mut()
                        .zip(row)
                        .for_each(|(g, x)| *g += dz * x);
                }
            }
            opt.update(&mut head, &grad);
        }
        if head
            .weights()
            .iter()
            .chain(head.bias())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Numeric(format!(
                "self-labeling diverged in iteration {}",
                iteration + 1
            )));
        }
        probs = forward(&head, set)?;
        steps.push(SelfLabelStep {
            selected,
            mean_confidence: mean_confidence(&probs),
        });
    }
    Ok(SelfLabelOutcome {
        head,
        initial_mean_confidence,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignments::Assignment;
    use crate::corpus::{Dialog, Speaker, Turn, Utterance};
    use crate::scan::assign;

    #[test]
    fn letters() {
        let first: Vec<String> = (0..20).map(cluster_letter).collect();
        assert_eq!(first.concat(), "abcdefghijklmnopqrst");
        assert_eq!(cluster_letter(25), "z");
        assert_eq!(cluster_letter(26), "aa");
        assert_eq!(cluster_letter(27), "ab");
        assert_eq!(cluster_letter(26 + 26 * 26), "aaa");
        for i in 0..2000 {
            assert_eq!(parse_letter(&cluster_letter(i)), Some(i));
        }
        assert_eq!(parse_letter("A"), None);
    }

    #[test]
    fn per_role_names() {
        let n = Naming::PerRole {
            clusters_per_role: 3,
        };
        assert_eq!(n.name(0), "Aa");
        assert_eq!(n.name(3), "Ua");
        assert_eq!(n.name(5), "Uc");
        for i in 0..6 {
            assert_eq!(n.parse(&n.name(i)), Some(i));
        }
        assert_eq!(n.parse("Ad"), None);
        assert_eq!(n.parse("^"), None);
    }

    fn corpus(n: usize) -> Corpus {
        let dialogs = (0..n)
            .map(|i| Dialog {
                id: format!("d{i}"),
                turns: vec![Turn {
                    agent: Utterance {
                        id: format!("u{i}"),
                        dialog_id: format!("d{i}"),
                        turn: 1,
                        speaker: Speaker::Agent,
                        text: format!("text {i}"),
                    },
                    user: None,
                }],
            })
            .collect();
        Corpus::new(dialogs).unwrap()
    }

    #[test]
    fn prototypes() {
        let mut t = AssignmentTable::new();
        t.insert(
            "u0",
            Assignment {
                cluster: 0,
                confidence: 0.7,
            },
        )
        .unwrap();
        t.insert(
            "u1",
            Assignment {
                cluster: 0,
                confidence: 0.9,
            },
        )
        .unwrap();
        t.insert(
            "u3",
            Assignment {
                cluster: 2,
                confidence: 0.8,
            },
        )
        .unwrap();
        t.insert(
            "u2",
            Assignment {
                cluster: 2,
                confidence: 0.8,
            },
        )
        .unwrap();
        t.insert(
            "u4",
            Assignment {
                cluster: 3,
                confidence: 0.4,
            },
        )
        .unwrap();
        let labels = extract_prototypes(&t, &corpus(5), 5).unwrap();
        let ids: Vec<Option<&str>> = labels
            .labels
            .iter()
            .map(|l| l.prototype_id.as_deref())
            .collect();
        assert_eq!(ids, [Some("u1"), None, Some("u2"), Some("u4"), None]);
        assert_eq!(labels.labels[3].prototype_text.as_deref(), Some("text 4"));
        assert_eq!(labels.labels[1].letter, "b");

        let mut unknown = AssignmentTable::new();
        unknown
            .insert(
                "zz",
                Assignment {
                    cluster: 0,
                    confidence: 1.0,
                },
            )
            .unwrap();
        assert!(extract_prototypes(&unknown, &corpus(1), 2).is_err());
    }

    #[test]
    fn labels_dump_round_trip() {
        let mut t = AssignmentTable::new();
        t.insert(
            "u0",
            Assignment {
                cluster: 1,
                confidence: 0.7,
            },
        )
        .unwrap();
        let labels = extract_prototypes(&t, &corpus(1), 2).unwrap();
        let text = labels.to_text();
        assert_eq!(text, "a\t0\t\t\nb\t1\tu0\ttext 0\n");
        let back = ClusterLabels::from_text(&text).unwrap();
        assert_eq!(back.labels[1].prototype_text.as_deref(), Some("text 0"));
        assert_eq!(back.labels[0].prototype_id, None);
    }

    fn two_blob_set() -> EmbeddingSet {
        let mut data = Vec::new();
        let mut ids = Vec::new();
        for i in 0..20 {
            let (x, y) = if i % 2 == 0 {
                (1.0, 0.05 * i as f64)
            } else {
                (0.05 * i as f64, 1.0)
            };
            let n = (x * x + y * y).sqrt();
            data.extend([x / n, y / n]);
            ids.push(format!("u{i}"));
        }
        EmbeddingSet::new(ids, 2, data).unwrap()
    }

    #[test]
    fn impossible_threshold_fails_and_zero_iterations_is_identity() {
        let set = two_blob_set();
        let head = crate::scan::init_head(2, 2, 3).unwrap();
        let cfg = TrainConfig::default();
        let err = fine_tune_confident(&head, &set, 1.01, 3, &cfg).unwrap_err();
        assert!(err.to_string().contains("threshold too high"));
        let out = fine_tune_confident(&head, &set, 0.5, 0, &cfg).unwrap();
        assert_eq!(out.head, head);
        assert!(out.steps.is_empty());
    }

    #[test]
    fn confident_head_is_a_fixed_point() {
        let set = two_blob_set();
        let head =
            ClusterHead::from_parts(2, 2, vec![40.0, -40.0, -40.0, 40.0], vec![0.0, 0.0]).unwrap();
        let before = assign(&head, &set).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let out = fine_tune_confident(&head, &set, 0.0, 3, &cfg).unwrap();
        let after = assign(&out.head, &set).unwrap();
        for ((_, a), (_, b)) in before.iter().zip(after.iter()) {
            assert_eq!(a.cluster, b.cluster);
        }
    }
}

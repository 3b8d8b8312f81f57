//! Transition models between cluster states and the pruned dialog graph.
//!
//! Every dialog contributes the path `^ -> A_1 -> U_1 -> A_2 -> ... -> $`
//! over the clusters of its utterances. Outgoing counts of each node are
//! normalized into empirical transition probabilities.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::assignments::AssignmentTable;
use crate::corpus::Corpus;
use crate::error::{invalid, Error, Result};
use crate::selflabel::ClusterLabels;

pub const DEFAULT_PRUNE_THRESHOLD: f64 = 0.6;
pub const LABEL_WIDTH: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Start,
    Cluster(usize),
    End,
}

impl Node {
    /// `^`, `$`, or the cluster's name under `name`.
    pub fn id(&self, name: impl Fn(usize) -> String) -> String {
        match *self {
            Node::Start => "^".to_string(),
            Node::End => "$".to_string(),
            Node::Cluster(c) => name(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: Node,
    pub to: Node,
    pub count: u64,
    pub probability: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionModel {
    counts: BTreeMap<(Node, Node), u64>,
}

impl TransitionModel {
    pub fn from_counts(counts: BTreeMap<(Node, Node), u64>) -> Result<Self> {
        for &(from, to) in counts.keys() {
            if from == Node::End || to == Node::Start {
                return Err(invalid("edges may not leave $ or enter ^"));
            }
        }
        Ok(TransitionModel {
            counts: counts.into_iter().filter(|(_, c)| *c > 0).collect(),
        })
    }

    pub fn count(&self, from: Node, to: Node) -> u64 {
        self.counts.get(&(from, to)).copied().unwrap_or(0)
    }

    pub fn out_count(&self, from: Node) -> u64 {
        self.counts
            .range((from, Node::Start)..=(from, Node::End))
            .map(|(_, c)| c)
            .sum()
    }

    pub fn probability(&self, from: Node, to: Node) -> f64 {
        match self.out_count(from) {
            0 => 0.0,
            total => self.count(from, to) as f64 / total as f64,
        }
    }

    /// Every edge with its empirical probability.
    pub fn edges(&self) -> Vec<Edge> {
        let mut totals: HashMap<Node, u64> = HashMap::new();
        for (&(from, _), &c) in &self.counts {
            *totals.entry(from).or_default() += c;
        }
        self.counts
            .iter()
            .map(|(&(from, to), &count)| Edge {
                from,
                to,
                count,
                probability: count as f64 / totals[&from] as f64,
            })
            .collect()
    }

    /// `^`, `$` and every cluster touched by an edge.
    pub fn nodes(&self) -> BTreeSet<Node> {
        let mut nodes: BTreeSet<Node> = [Node::Start, Node::End].into();
        for &(a, b) in self.counts.keys() {
            nodes.insert(a);
            nodes.insert(b);
        }
        nodes
    }

    /// `from<TAB>to<TAB>count<TAB>prob`, probabilities at 6 decimals, sorted
    /// by node id then target id.
    pub fn to_edge_list(&self, name: impl Fn(usize) -> String) -> String {
        let mut rows: Vec<(String, String, Edge)> = self
            .edges()
            .into_iter()
            .map(|e| (e.from.id(&name), e.to.id(&name), e))
            .collect();
        rows.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        let mut out = String::new();
        for (from, to, e) in rows {
            let _ = writeln!(out, "{from}\t{to}\t{}\t{:.6}", e.count, e.probability);
        }
        out
    }

    /// Rebuilds counts from an edge list; `resolve` maps cluster names back to ids.
    pub fn from_edge_list(text: &str, resolve: impl Fn(&str) -> Option<usize>) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let bad = |msg: String| Error::Parse { line: n + 1, msg };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(bad("expected four tab-separated fields".into()));
            }
            let node = |s: &str| match s {
                "^" => Ok(Node::Start),
                "$" => Ok(Node::End),
                other => resolve(other)
                    .map(Node::Cluster)
                    .ok_or_else(|| bad(format!("unknown node {other:?}"))),
            };
            let count: u64 = fields[2].parse().map_err(|_| bad("bad count".into()))?;
            if counts
                .insert((node(fields[0])?, node(fields[1])?), count)
                .is_some()
            {
                return Err(bad("edge listed twice".into()));
            }
        }
        TransitionModel::from_counts(counts)
    }
}

/// Counts `^ -> A_1`, `A_t -> U_t`, `U_t -> A_{t+1}` and `last -> $` over
/// every dialog.
pub fn build_transitions(
    corpus: &Corpus,
    assignments: &AssignmentTable,
) -> Result<TransitionModel> {
    let mut counts = BTreeMap::new();
    for dialog in corpus.dialogs() {
        let mut prev = Node::Start;
        for u in dialog.utterances() {
            let a = assignments.get(&u.id).ok_or_else(|| Error::Missing {
                what: "cluster assignment",
                id: u.id.clone(),
            })?;
            let node = Node::Cluster(a.cluster);
            *counts.entry((prev, node)).or_insert(0u64) += 1;
            prev = node;
        }
        *counts.entry((prev, Node::End)).or_insert(0) += 1;
    }
    TransitionModel::from_counts(counts)
}

/// Transitions kept after pruning, with their unrenormalized probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogGraph {
    pub threshold: f64,
    pub edges: Vec<Edge>,
    pub nodes: BTreeSet<Node>,
}

impl DialogGraph {
    pub fn has_edge(&self, from: Node, to: Node) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }

    pub fn edge(&self, from: Node, to: Node) -> Option<&Edge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }
}

/// Keeps edges with probability at or above `threshold`; clusters left
/// without any edge are dropped.
pub fn prune(model: &TransitionModel, threshold: f64) -> Result<DialogGraph> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(invalid(format!(
            "prune threshold {threshold} outside [0, 1]"
        )));
    }
    let edges: Vec<Edge> = model
        .edges()
        .into_iter()
        .filter(|e| e.probability >= threshold)
        .collect();
    let mut nodes: BTreeSet<Node> = [Node::Start, Node::End].into();
    for e in &edges {
        nodes.insert(e.from);
        nodes.insert(e.to);
    }
    Ok(DialogGraph {
        threshold,
        edges,
        nodes,
    })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' | '\r' | '\t' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}

fn truncate(s: &str, width: usize) -> &str {
    match s.char_indices().nth(width) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Graphviz text of the graph, nodes and edges sorted by id.
pub fn to_dot(graph: &DialogGraph, labels: &ClusterLabels) -> Result<String> {
    let by_cluster: HashMap<usize, &crate::selflabel::ClusterLabel> =
        labels.labels.iter().map(|l| (l.cluster, l)).collect();
    let mut names: HashMap<Node, String> = HashMap::new();
    let mut node_lines: Vec<(String, String)> = Vec::new();
    for &node in &graph.nodes {
        let (id, caption, tooltip) = match node {
            Node::Start => ("^".to_string(), "^".to_string(), "start".to_string()),
            Node::End => ("$".to_string(), "$".to_string(), "end".to_string()),
            Node::Cluster(c) => {
                let label = by_cluster.get(&c).ok_or_else(|| Error::Missing {
                    what: "label",
                    id: format!("cluster {c}"),
                })?;
                let proto = truncate(label.prototype_text.as_deref().unwrap_or(""), LABEL_WIDTH);
                let caption = if proto.is_empty() {
                    label.letter.clone()
                } else {
                    format!("{}: {proto}", label.letter)
                };
                (label.letter.clone(), caption, proto.to_string())
            }
        };
        names.insert(node, id.clone());
        let line = format!(
            "  \"{}\" [label=\"{}\", tooltip=\"{}\"];",
            escape(&id),
            escape(&caption),
            escape(&tooltip)
        );
        node_lines.push((id, line));
    }
    node_lines.sort_by(|a, b| a.0.cmp(&b.0));

    let mut edge_lines: Vec<(&str, &str, String)> = graph
        .edges
        .iter()
        .map(|e| {
            let (from, to) = (names[&e.from].as_str(), names[&e.to].as_str());
            let line = format!(
                "  \"{}\" -> \"{}\" [label=\"{:.2}\"];",
                escape(from),
                escape(to),
                e.probability
            );
            (from, to, line)
        })
        .collect();
    edge_lines.sort_by(|a, b| match a.0.cmp(b.0) {
        Ordering::Equal => a.1.cmp(b.1),
        o => o,
    });

    let mut out = String::from("digraph dialog {\n  rankdir=LR;\n");
    for (_, line) in node_lines {
        out.push_str(&line);
        out.push('\n');
    }
    for (_, _, line) in edge_lines {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("}\n");
    Ok(out)
}

pub fn write_text(text: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignments::Assignment;
    use crate::corpus::{Dialog, Speaker, Turn, Utterance};
    use crate::selflabel::{cluster_letter, ClusterLabel};

    fn utt(d: &str, turn: u32, speaker: Speaker) -> Utterance {
        let s = if speaker == Speaker::Agent { "a" } else { "u" };
        Utterance {
            id: format!("{d}-{turn}-{s}"),
            dialog_id: d.to_string(),
            turn,
            speaker,
            text: format!("{d} {turn} {s}"),
        }
    }

    /// Dialog whose utterances, in speaking order, fall in `clusters`.
    fn dialog(d: &str, clusters: &[usize], table: &mut AssignmentTable) -> Dialog {
        let mut turns = Vec::new();
        for (t, pair) in clusters.chunks(2).enumerate() {
            let turn = t as u32 + 1;
            let agent = utt(d, turn, Speaker::Agent);
            table
                .insert(
                    agent.id.clone(),
                    Assignment {
                        cluster: pair[0],
                        confidence: 1.0,
                    },
                )
                .unwrap();
            let user = pair.get(1).map(|&c| {
                let u = utt(d, turn, Speaker::User);
                table
                    .insert(
                        u.id.clone(),
                        Assignment {
                            cluster: c,
                            confidence: 1.0,
                        },
                    )
                    .unwrap();
                u
            });
            turns.push(Turn { agent, user });
        }
        Dialog {
            id: d.to_string(),
            turns,
        }
    }

    fn labels(n: usize) -> ClusterLabels {
        ClusterLabels {
            labels: (0..n)
                .map(|c| ClusterLabel {
                    cluster: c,
                    letter: cluster_letter(c),
                    prototype_id: Some(format!("p{c}")),
                    prototype_text: Some(format!("prototype {c}")),
                    confidence: 1.0,
                })
                .collect(),
        }
    }

    const C0: Node = Node::Cluster(0);
    const C1: Node = Node::Cluster(1);
    const C2: Node = Node::Cluster(2);

    #[test]
    fn single_path() {
        let mut t = AssignmentTable::new();
        let corpus = Corpus::new(vec![dialog("d1", &[0, 1], &mut t)]).unwrap();
        let m = build_transitions(&corpus, &t).unwrap();
        assert_eq!(m.probability(Node::Start, C0), 1.0);
        assert_eq!(m.probability(C0, C1), 1.0);
        assert_eq!(m.probability(C1, Node::End), 1.0);
        assert_eq!(m.edges().len(), 3);
    }

    #[test]
    fn two_dialogs_by_hand() {
        let mut t = AssignmentTable::new();
        let corpus = Corpus::new(vec![
            dialog("d1", &[0, 1, 2, 1], &mut t),
            dialog("d2", &[0, 1], &mut t),
        ])
        .unwrap();
        let m = build_transitions(&corpus, &t).unwrap();
        assert_eq!(m.probability(C0, C1), 1.0);
        assert!((m.probability(C1, Node::End) - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.probability(C1, C2) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.count(Node::Start, C0), 2);

        let g = prune(&m, 0.6).unwrap();
        assert!(g.has_edge(C1, Node::End));
        assert!(!g.has_edge(C1, C2));
        // c2 keeps its edge c2 -> c1 (probability 1)
        assert!(g.nodes.contains(&C2));
    }

    #[test]
    fn final_turn_without_user() {
        let mut t = AssignmentTable::new();
        let corpus = Corpus::new(vec![dialog("d1", &[0, 1, 2], &mut t)]).unwrap();
        let m = build_transitions(&corpus, &t).unwrap();
        assert_eq!(m.count(C2, Node::End), 1);
        assert_eq!(m.count(C1, C2), 1);
    }

    #[test]
    fn empty_corpus_has_only_boundaries() {
        let m = build_transitions(&Corpus::default(), &AssignmentTable::new()).unwrap();
        assert!(m.edges().is_empty());
        assert_eq!(m.nodes(), [Node::Start, Node::End].into());
    }

    #[test]
    fn missing_assignment_is_named() {
        let mut t = AssignmentTable::new();
        let corpus = Corpus::new(vec![dialog("d1", &[0, 1], &mut t)]).unwrap();
        let partial: AssignmentTable = t.iter().take(1).map(|(k, v)| (k.to_string(), *v)).collect();
        let err = build_transitions(&corpus, &partial).unwrap_err();
        assert!(err.to_string().contains("d1-1-u"));
    }

    #[test]
    fn prune_boundaries() {
        let mut t = AssignmentTable::new();
        let corpus = Corpus::new(vec![
            dialog("d1", &[0, 1], &mut t),
            dialog("d2", &[0, 2], &mut t),
        ])
        .unwrap();
        let m = build_transitions(&corpus, &t).unwrap();
        assert_eq!(prune(&m, 0.0).unwrap().edges, m.edges());
        let g = prune(&m, 1.0).unwrap();
        // c0 -> {c1, c2} at 0.5 each is fully pruned; c1 and c2 keep their end edges
        assert!(!g.has_edge(C0, C1) && !g.has_edge(C0, C2));
        assert!(g.has_edge(Node::Start, C0));
        assert!(prune(&m, 1.5).is_err());

        let mut t = AssignmentTable::new();
        let corpus = Corpus::new(vec![
            dialog("d1", &[0, 1], &mut t),
            dialog("d2", &[0, 2], &mut t),
            dialog("d3", &[3, 1], &mut t),
            dialog("d4", &[3, 2], &mut t),
        ])
        .unwrap();
        let m = build_transitions(&corpus, &t).unwrap();
        // every edge touching clusters 0 and 3 has probability 0.5
        let g = prune(&m, 0.6).unwrap();
        assert_eq!(g.nodes, [Node::Start, C1, C2, Node::End].into());
        assert_eq!(g.edges.len(), 2);
        assert_eq!(prune(&m, 0.0).unwrap().edges.len(), 8);
    }

    #[test]
    fn dot_output() {
        let mut t = AssignmentTable::new();
        let corpus = Corpus::new(vec![dialog("d1", &[0, 1], &mut t)]).unwrap();
        let g = prune(&build_transitions(&corpus, &t).unwrap(), 0.6).unwrap();
        let dot = to_dot(&g, &labels(2)).unwrap();
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("  \"^\" -> \"a\" [label=\"1.00\"];\n"));
        assert!(dot.contains("  \"a\" -> \"b\" [label=\"1.00\"];\n"));
        assert!(dot.contains("  \"b\" -> \"$\" [label=\"1.00\"];\n"));
        assert_eq!(dot, to_dot(&g, &labels(2)).unwrap());
        assert!(to_dot(&g, &labels(1)).is_err());
    }

    #[test]
    fn dot_escapes_and_truncates() {
        let mut t = AssignmentTable::new();
        let corpus = Corpus::new(vec![dialog("d1", &[0, 0], &mut t)]).unwrap();
        let g = prune(&build_transitions(&corpus, &t).unwrap(), 0.0).unwrap();
        let mut l = labels(1);
        l.labels[0].prototype_text = Some(format!("say \"hi\" {}", "x".repeat(100)));
        let dot = to_dot(&g, &l).unwrap();
        assert!(dot.contains("say \\\"hi\\\""));
        let tooltip = dot.lines().find(|s| s.starts_with("  \"a\" [")).unwrap();
        assert!(!tooltip.contains(&"x".repeat(60)));
        assert!(tooltip.contains(&"x".repeat(51)));
    }

    #[test]
    fn edge_list_round_trip() {
        let mut t = AssignmentTable::new();
        let corpus = Corpus::new(vec![
            dialog("d1", &[0, 1, 2, 1], &mut t),
            dialog("d2", &[0, 1], &mut t),
        ])
        .unwrap();
        let m = build_transitions(&corpus, &t).unwrap();
        let text = m.to_edge_list(cluster_letter);
        assert!(text.contains("b\t$\t2\t0.666667\n"), "{text}");
        let back = TransitionModel::from_edge_list(&text, crate::selflabel::parse_letter).unwrap();
        assert_eq!(back, m);
    }
}

//! Per-utterance cluster memberships shared by every clustering method.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub cluster: usize,
    pub confidence: f64,
}

/// Cluster id and confidence per utterance id, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssignmentTable {
    entries: IndexMap<String, Assignment>,
}

impl AssignmentTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, assignment: Assignment) -> Result<()> {
        let id = id.into();
        if !(assignment.confidence > 0.0 && assignment.confidence <= 1.0) {
            return Err(invalid(format!(
                "confidence {} of {id:?} outside (0, 1]",
                assignment.confidence
            )));
        }
        if self.entries.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.entries.insert(id, assignment);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Assignment> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Assignment)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// One past the largest cluster id, or 0 when empty.
    pub fn cluster_bound(&self) -> usize {
        self.entries
            .values()
            .map(|a| a.cluster + 1)
            .max()
            .unwrap_or(0)
    }

    /// Members per cluster for `clusters` clusters.
    pub fn cluster_sizes(&self, clusters: usize) -> Result<Vec<usize>> {
        let mut sizes = vec![0usize; clusters];
        for (id, a) in &self.entries {
            *sizes.get_mut(a.cluster).ok_or_else(|| {
                invalid(format!(
                    "utterance {id:?} has cluster {} >= {clusters}",
                    a.cluster
                ))
            })? += 1;
        }
        Ok(sizes)
    }

    /// Adds every entry of `other`, failing on a repeated id.
    pub fn extend(&mut self, other: AssignmentTable) -> Result<()> {
        for (id, a) in other.entries {
            self.insert(id, a)?;
        }
        Ok(())
    }

    /// `utterance_id<TAB>cluster_id<TAB>confidence` at 6 decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, a) in &self.entries {
            let _ = writeln!(out, "{id}\t{}\t{:.6}", a.cluster, a.confidence);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut table = AssignmentTable::new();
        for (n, line) in text.lines().enumerate() {
            let bad = |msg: &str| Error::Parse {
                line: n + 1,
                msg: msg.to_string(),
            };
            let mut parts = line.split('\t');
            let (Some(id), Some(cluster), Some(conf), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected three tab-separated fields"));
            };
            let cluster = cluster.parse().map_err(|_| bad("bad cluster id"))?;
            let confidence = conf.parse().map_err(|_| bad("bad confidence"))?;
            table
                .insert(
                    id,
                    Assignment {
                        cluster,
                        confidence,
                    },
                )
                .map_err(|e| bad(&e.to_string()))?;
        }
        Ok(table)
    }
}

impl FromIterator<(String, Assignment)> for AssignmentTable {
    /// Later duplicates overwrite earlier ones; use [`AssignmentTable::insert`] to reject them.
    fn from_iter<I: IntoIterator<Item = (String, Assignment)>>(iter: I) -> Self {
        AssignmentTable {
            entries: iter.into_iter().collect(),
        }
    }
}

pub fn read_assignments(path: impl AsRef<Path>) -> Result<AssignmentTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    AssignmentTable::from_text(&text)
}

pub fn write_assignments(table: &AssignmentTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, table.to_text()).map_err(|e| Error::io(path, e))
}

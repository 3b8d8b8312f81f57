//! Exact cosine k-nearest-neighbor mining.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::embed::{dot, EmbeddingSet};
use crate::error::{invalid, Error, Result};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub similarity: f64,
}

/// For each anchor row, its `k` most similar other rows, most similar first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    k: usize,
    rows: Vec<Vec<Neighbor>>,
}

impl NeighborTable {
    pub fn new(k: usize, rows: Vec<Vec<Neighbor>>) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        for (anchor, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(invalid(format!(
                    "anchor {anchor} has {} neighbors, expected {k}",
                    row.len()
                )));
            }
            if row
                .iter()
                .any(|n| n.index == anchor || n.index >= rows.len())
            {
                return Err(invalid(format!(
                    "anchor {anchor} lists itself or an unknown row"
                )));
            }
        }
        Ok(NeighborTable { k, rows })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn neighbors(&self, anchor: usize) -> &[Neighbor] {
        &self.rows[anchor]
    }

    pub fn rows(&self) -> &[Vec<Neighbor>] {
        &self.rows
    }

    /// `anchor_id<TAB>neighbor_id:sim,...` with similarities at 6 decimals.
    pub fn to_text(&self, ids: &[String]) -> String {
        let mut out = String::new();
        for (anchor, row) in self.rows.iter().enumerate() {
            out.push_str(&ids[anchor]);
            out.push('\t');
            for (j, n) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}:{:.6}", ids[n.index], n.similarity);
            }
            out.push('\n');
        }
        out
    }

    /// Parses a dump against the row order of `ids`.
    pub fn from_text(text: &str, ids: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let lookup = |id: &str, line: usize| {
            index.get(id).copied().ok_or_else(|| Error::Parse {
                line,
                msg: format!("unknown utterance id {id:?}"),
            })
        };
        let mut rows: Vec<Option<Vec<Neighbor>>> = vec![None; ids.len()];
        let mut k = None;
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let bad = |msg: &str| Error::Parse {
                line: line_no,
                msg: msg.to_string(),
            };
            let (anchor, rest) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
            let anchor = lookup(anchor, line_no)?;
            let mut row = Vec::new();
            for item in rest.split(',') {
                let (id, sim) = item
                    .rsplit_once(':')
                    .ok_or_else(|| bad("neighbor without similarity"))?;
                let similarity: f64 = sim.parse().map_err(|_| bad("bad similarity"))?;
                row.push(Neighbor {
                    index: lookup(id, line_no)?,
                    similarity,
                });
            }
            if *k.get_or_insert(row.len()) != row.len() {
                return Err(bad("rows have different neighbor counts"));
            }
            if rows[anchor].replace(row).is_some() {
                return Err(bad("anchor listed twice"));
            }
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.ok_or_else(|| Error::Missing {
                    what: "neighbor row",
                    id: ids[i].clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        NeighborTable::new(k.unwrap_or(0), rows)
    }
}

pub fn write_neighbors(
    table: &NeighborTable,
    ids: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, table.to_text(ids)).map_err(|e| Error::io(path, e))
}

pub fn read_neighbors(path: impl AsRef<Path>, ids: &[String]) -> Result<NeighborTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    NeighborTable::from_text(&text, ids)
}

/// `a` ranks before `b`: higher similarity, then lower index.
fn ranks_before(a: &Neighbor, b: &Neighbor) -> bool {
    a.similarity > b.similarity || (a.similarity == b.similarity && a.index < b.index)
}

fn offer(top: &mut Vec<Neighbor>, k: usize, cand: Neighbor) {
    if top.len() == k && !ranks_before(&cand, &top[k - 1]) {
        return;
    }
    let pos = top
        .iter()
        .position(|t| ranks_before(&cand, t))
        .unwrap_or(top.len());
    top.insert(pos, cand);
    top.truncate(k);
}

/// Rows per tile; two tiles of 256-dim rows stay within L2.
const TILE: usize = 64;

/// Exact top-`k` by dot product over unit-norm rows, self excluded.
///
/// Each unordered pair is scored once, tile by tile, and offered to both
/// rows. The result does not depend on visiting order because ranking is a
/// strict total order (similarity, then lower index).
pub fn mine_neighbors(set: &EmbeddingSet, k: usize) -> Result<NeighborTable> {
    set.require_normalized()?;
    if k == 0 || k >= set.len() {
        return Err(invalid(format!(
            "k = {k} must satisfy 1 <= k < {} (number of rows)",
            set.len()
        )));
    }
    let n = set.len();
    let mut rows: Vec<Vec<Neighbor>> = (0..n).map(|_| Vec::with_capacity(k + 1)).collect();
    for bi in (0..n).step_by(TILE) {
        for bj in (bi..n).step_by(TILE) {
            for i in bi..(bi + TILE).min(n) {
                let a = set.row(i);
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + TILE).min(n) {
                    let similarity = dot(a, set.row(j));
                    offer(
                        &mut rows[i],
                        k,
                        Neighbor {
                            index: j,
                            similarity,
                        },
                    );
                    offer(
                        &mut rows[j],
                        k,
                        Neighbor {
                            index: i,
                            similarity,
                        },
                    );
                }
            }
        }
    }
    NeighborTable::new(k, rows)
}

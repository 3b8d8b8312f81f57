//! Dense utterance embeddings.
//!
//! On disk an embedding set is a `TSCN` binary file of little-endian `f32`
//! rows plus a `.ids` sidecar naming each row. In memory rows are `f64`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::corpus::{Corpus, GroundTruth};
use crate::error::{invalid, Error, Result};
use crate::rng;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"TSCN";
pub const FORMAT_VERSION: u32 = 1;

/// Tolerance on row norms for a set to count as normalized.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f64>,
    normalized: bool,
}

impl EmbeddingSet {
    /// Validates shape, id uniqueness and finiteness. The `normalized` flag is
    /// set when every row already has unit norm.
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::Format("empty embedding set".into()));
        }
        if dim < 2 {
            return Err(Error::Format(format!(
                "embedding dimension {dim} is below 2"
            )));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::Format(format!(
                "{} values do not fill {} rows of dimension {dim}",
                data.len(),
                ids.len()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite embedding value in row {:?}",
                ids[pos / dim]
            )));
        }
        let mut set = EmbeddingSet {
            ids,
            dim,
            data,
            normalized: false,
        };
        let normalized = set.rows().all(|r| (norm(r) - 1.0).abs() <= UNIT_NORM_TOL);
        set.normalized = normalized;
        Ok(set)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let ids = indices.iter().map(|&i| self.ids[i].clone()).collect();
        let data = indices
            .iter()
            .flat_map(|&i| self.row(i).iter().copied())
            .collect();
        EmbeddingSet::new(ids, self.dim, data)
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(invalid("embedding set is not L2-normalized"))
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        out.extend_from_slice(EMBEDDING_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], ids: Vec<String>) -> Result<Self> {
        let (count, dim, payload) = parse_header(bytes, EMBEDDING_MAGIC)?;
        if count == 0 {
            return Err(Error::Format("empty embedding set".into()));
        }
        if payload.len() != count * dim * 4 {
            return Err(Error::Format(format!(
                "payload length mismatch: header says {count}x{dim}, payload has {} bytes",
                payload.len()
            )));
        }
        if ids.len() != count {
            return Err(Error::Format(format!(
                "ids sidecar has {} entries, header count is {count}",
                ids.len()
            )));
        }
        EmbeddingSet::new(ids, dim, read_f32s(payload))
    }
}

pub(crate) fn parse_header<'a>(
    bytes: &'a [u8],
    magic: &[u8; 4],
) -> Result<(usize, usize, &'a [u8])> {
    if bytes.len() < 16 || &bytes[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic: expected {:?}",
            std::str::from_utf8(magic).unwrap_or("?")
        )));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    Ok((word(8) as usize, word(12) as usize, &bytes[16..]))
}

pub(crate) fn read_f32s(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect()
}

pub fn ids_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let sidecar = ids_path(path);
    let ids_text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let ids = ids_text.lines().map(str::to_string).collect();
    EmbeddingSet::from_bytes(&bytes, ids)
}

pub fn write_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, set.to_bytes()).map_err(|e| Error::io(path, e))?;
    let mut ids = String::new();
    for id in set.ids() {
        ids.push_str(id);
        ids.push('\n');
    }
    let sidecar = ids_path(path);
    std::fs::write(&sidecar, ids).map_err(|e| Error::io(&sidecar, e))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Scales every row to unit length. Fails on a zero row, naming its id.
pub fn l2_normalize(set: &EmbeddingSet) -> Result<EmbeddingSet> {
    let mut data = set.data.clone();
    for (i, row) in data.chunks_exact_mut(set.dim).enumerate() {
        let n = norm(row);
        if n == 0.0 {
            return Err(Error::ZeroNorm(set.ids[i].clone()));
        }
        row.iter_mut().for_each(|v| *v /= n);
    }
    Ok(EmbeddingSet {
        ids: set.ids.clone(),
        dim: set.dim,
        data,
        normalized: true,
    })
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // splitmix64 finalizer spreads low-entropy inputs over all bits
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Signed feature hashing of lowercase word unigrams and bigrams.
pub fn hash_text(text: &str, dim: usize, seed: u64) -> Option<Vec<f64>> {
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    if words.is_empty() {
        return None;
    }
    let mut v = vec![0.0; dim];
    let mut add = |feature: &str| {
        let h = fnv1a(seed, feature.as_bytes());
        let bucket = (h % dim as u64) as usize;
        v[bucket] += if (h >> 40) & 1 == 0 { 1.0 } else { -1.0 };
    };
    for w in &words {
        add(w);
    }
    for pair in words.windows(2) {
        add(&format!("{} {}", pair[0], pair[1]));
    }
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

/// Text-only embedder, one row per corpus utterance in corpus order.
pub fn hashed_ngram_embed(corpus: &Corpus, dim: usize, seed: u64) -> Result<EmbeddingSet> {
    if dim < 8 {
        return Err(invalid(format!(
            "hashed embedding dimension {dim} is below 8"
        )));
    }
    let mut ids = Vec::with_capacity(corpus.num_utterances());
    let mut data = Vec::with_capacity(corpus.num_utterances() * dim);
    for u in corpus.utterances() {
        let v = hash_text(&u.text, dim, seed).ok_or_else(|| Error::EmptyText(u.id.clone()))?;
        ids.push(u.id.clone());
        data.extend(v);
    }
    EmbeddingSet::new(ids, dim, data)
}

/// Embeds each annotated utterance as its state's mean direction plus
/// isotropic Gaussian noise, normalized. `noise` is the per-coordinate
/// standard deviation and `separation` the length of each state mean.
pub fn gaussian_oracle_embed(
    truth: &GroundTruth,
    dim: usize,
    separation: f64,
    noise: f64,
    seed: u64,
) -> Result<EmbeddingSet> {
    let states = truth.num_states();
    if dim < states.max(2) {
        return Err(invalid(format!(
            "dimension {dim} is below the number of states {states}"
        )));
    }
    if separation <= 0.0 || noise < 0.0 || !separation.is_finite() || !noise.is_finite() {
        return Err(invalid(
            "separation must be positive and noise non-negative",
        ));
    }
    let mut rng = rng::rng_from_seed(seed);
    let means: Vec<Vec<f64>> = (0..states)
        .map(|_| {
            let mut m: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = norm(&m);
            m.iter_mut().for_each(|x| *x *= separation / n);
            m
        })
        .collect();
    let mut ids = Vec::with_capacity(truth.state_of.len());
    let mut data = Vec::with_capacity(truth.state_of.len() * dim);
    for (id, &state) in &truth.state_of {
        let mut v: Vec<f64> = means[state]
            .iter()
            .map(|&m| m + noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let n = norm(&v);
        if n == 0.0 {
            return Err(Error::ZeroNorm(id.clone()));
        }
        v.iter_mut().for_each(|x| *x /= n);
        ids.push(id.clone());
        data.extend(v);
    }
    EmbeddingSet::new(ids, dim, data)
}

//! Run configuration as a flat `key=value` file.
//!
//! Lines are `key = value`; `#` starts a comment. Every key may also be given
//! on the command line as `--key value`, which wins over the file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scan::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// One head over agent and user utterances together.
    Joint,
    /// Separate heads, neighbor tables and letter namespaces per speaker.
    PerRole,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Mode::Joint),
            "per_role" => Ok(Mode::PerRole),
            other => Err(Error::Config(format!(
                "mode must be joint or per_role, got {other:?}"
            ))),
        }
    }
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Joint => "joint",
            Mode::PerRole => "per_role",
        }
    }
}

/// Recognized keys with a one-line description each.
pub const KEYS: &[(&str, &str)] = &[
    ("corpus", "corpus file (one JSON utterance per line)"),
    (
        "truth",
        "ground-truth file with state and intent per utterance",
    ),
    (
        "embeddings",
        "TSCN embedding file; the hashed embedder is used when unset",
    ),
    ("out_dir", "pipeline output directory"),
    ("neighbors", "neighbor table dump"),
    ("head", "cluster head checkpoint"),
    (
        "history",
        "per-epoch loss history (defaults to <head>.history.tsv)",
    ),
    ("assignments", "assignment table"),
    ("labels", "cluster label table"),
    ("transitions", "transition edge list"),
    ("output", "output path of single-output subcommands"),
    ("clusters", "number of clusters C"),
    ("k", "neighbors mined per utterance"),
    ("entropy_weight", "weight of the cluster-entropy term"),
    ("learning_rate", "optimizer step size"),
    ("batch_size", "anchors per training step"),
    ("epochs", "training epochs"),
    ("eps", "probability floor inside logarithms"),
    (
        "selflabel_threshold",
        "minimum confidence for pseudo-labels",
    ),
    ("selflabel_iterations", "self-labeling rounds"),
    (
        "prune_threshold",
        "minimum transition probability kept in the graph",
    ),
    ("mode", "joint or per_role"),
    ("seed", "run seed; every stage derives its own stream"),
    ("embed_dim", "dimension of the hashed n-gram embedder"),
    ("kmeans_max_iters", "K-means iteration cap"),
    ("kmeans_tol", "K-means centroid-shift tolerance"),
    (
        "kmeans_restarts",
        "independently seeded K-means fits; the lowest inertia wins",
    ),
    (
        "synthetic_transitions",
        "state machine rows separated by ';', end column last",
    ),
    ("synthetic_templates", "templates per state and role"),
    ("synthetic_vocab", "slot filler vocabulary size"),
    ("synthetic_dialogs", "number of generated dialogs"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub neighbors: Option<PathBuf>,
    pub head: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub assignments: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub transitions: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub clusters: usize,
    pub k: usize,
    pub entropy_weight: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub eps: f64,
    pub selflabel_threshold: f64,
    pub selflabel_iterations: usize,
    pub prune_threshold: f64,
    pub mode: Mode,
    pub seed: u64,
    pub embed_dim: usize,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
    pub kmeans_restarts: usize,
    pub synthetic_transitions: String,
    pub synthetic_templates: usize,
    pub synthetic_vocab: usize,
    pub synthetic_dialogs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        PipelineConfig {
            corpus: None,
            truth: None,
            embeddings: None,
            out_dir: PathBuf::from("out"),
            neighbors: None,
            head: None,
            history: None,
            assignments: None,
            labels: None,
            transitions: None,
            output: None,
            clusters: crate::scan::DEFAULT_CLUSTERS,
            k: crate::neighbors::DEFAULT_K,
            entropy_weight: train.entropy_weight,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            epochs: train.epochs,
            eps: train.eps,
            selflabel_threshold: crate::selflabel::DEFAULT_THRESHOLD,
            selflabel_iterations: crate::selflabel::DEFAULT_ITERATIONS,
            prune_threshold: crate::structure::DEFAULT_PRUNE_THRESHOLD,
            mode: Mode::Joint,
            seed: 0,
            embed_dim: 256,
            kmeans_max_iters: crate::kmeans::DEFAULT_MAX_ITERS,
            kmeans_tol: crate::kmeans::DEFAULT_TOL,
            kmeans_restarts: 1,
            synthetic_transitions:
                "0,0.8,0.1,0,0,0.1;0,0,0.7,0.2,0,0.1;0,0,0,0.6,0.3,0.1;0,0,0,0,0.7,0.3;0,0,0,0,0,1"
                    .to_string(),
            synthetic_templates: 3,
            synthetic_vocab: 20,
            synthetic_dialogs: 200,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "corpus" => self.corpus = path(value),
            "truth" => self.truth = path(value),
            "embeddings" => self.embeddings = path(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "neighbors" => self.neighbors = path(value),
            "head" => self.head = path(value),
            "history" => self.history = path(value),
            "assignments" => self.assignments = path(value),
            "labels" => self.labels = path(value),
            "transitions" => self.transitions = path(value),
            "output" => self.output = path(value),
            "clusters" => self.clusters = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "entropy_weight" => self.entropy_weight = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "selflabel_threshold" => self.selflabel_threshold = parse(key, value)?,
            "selflabel_iterations" => self.selflabel_iterations = parse(key, value)?,
            "prune_threshold" => self.prune_threshold = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "kmeans_max_iters" => self.kmeans_max_iters = parse(key, value)?,
            "kmeans_tol" => self.kmeans_tol = parse(key, value)?,
            "kmeans_restarts" => self.kmeans_restarts = parse(key, value)?,
            "synthetic_transitions" => self.synthetic_transitions = value.to_string(),
            "synthetic_templates" => self.synthetic_templates = parse(key, value)?,
            "synthetic_vocab" => self.synthetic_vocab = parse(key, value)?,
            "synthetic_dialogs" => self.synthetic_dialogs = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.prune_threshold) {
            return fail("prune_threshold must lie in [0, 1]");
        }
        if self.clusters < 2 {
            return fail("clusters must be at least 2");
        }
        if self.kmeans_restarts == 0 {
            return fail("kmeans_restarts must be at least 1");
        }
        if self.k == 0 {
            return fail("k must be at least 1");
        }
        if !(self.selflabel_threshold >= 0.0 && self.selflabel_threshold.is_finite()) {
            return fail("selflabel_threshold must be finite and >= 0");
        }
        self.train_config(self.seed)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            entropy_weight: self.entropy_weight,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            eps: self.eps,
        }
    }

    /// The transition matrix encoded in `synthetic_transitions`.
    pub fn synthetic_matrix(&self) -> Result<Vec<Vec<f64>>> {
        self.synthetic_transitions
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|v| parse::<f64>("synthetic_transitions", v.trim()))
                    .collect()
            })
            .collect()
    }

    fn value_of(&self, key: &str) -> String {
        let p = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        match key {
            "corpus" => p(&self.corpus),
            "truth" => p(&self.truth),
            "embeddings" => p(&self.embeddings),
            "out_dir" => self.out_dir.display().to_string(),
            "neighbors" => p(&self.neighbors),
            "head" => p(&self.head),
            "history" => p(&self.history),
            "assignments" => p(&self.assignments),
            "labels" => p(&self.labels),
            "transitions" => p(&self.transitions),
            "output" => p(&self.output),
            "clusters" => self.clusters.to_string(),
            "k" => self.k.to_string(),
            "entropy_weight" => self.entropy_weight.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "epochs" => self.epochs.to_string(),
            "eps" => self.eps.to_string(),
            "selflabel_threshold" => self.selflabel_threshold.to_string(),
            "selflabel_iterations" => self.selflabel_iterations.to_string(),
            "prune_threshold" => self.prune_threshold.to_string(),
            "mode" => self.mode.as_str().to_string(),
            "seed" => self.seed.to_string(),
            "embed_dim" => self.embed_dim.to_string(),
            "kmeans_max_iters" => self.kmeans_max_iters.to_string(),
            "kmeans_tol" => self.kmeans_tol.to_string(),
            "kmeans_restarts" => self.kmeans_restarts.to_string(),
            "synthetic_transitions" => self.synthetic_transitions.clone(),
            "synthetic_templates" => self.synthetic_templates.to_string(),
            "synthetic_vocab" => self.synthetic_vocab.to_string(),
            "synthetic_dialogs" => self.synthetic_dialogs.to_string(),
            _ => unreachable!("every key in KEYS is handled"),
        }
    }

    /// Every key in `KEYS` order, parseable by [`PipelineConfig::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, _) in KEYS {
            let _ = writeln!(out, "{key}={}", self.value_of(key));
        }
        out
    }
}

//! File-based stages and the end-to-end run.
//!
//! Every stage reads its inputs from and writes its outputs to paths taken
//! from a [`PipelineConfig`]. The command-line subcommands call these same
//! functions, so chaining subcommands by hand reproduces a pipeline run.
//!
//! In `per_role` mode the embedding set is split by speaker. Neighbor tables
//! and heads are then stored once per role with an `.agent` or `.user`
//! infix before the extension, while assignments and labels stay in single files with user
//! clusters numbered from `C`.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub use crate::config::{Mode, PipelineConfig};

use crate::assignments::{read_assignments, write_assignments, Assignment, AssignmentTable};
use crate::corpus::{self, Corpus, GroundTruth, Speaker, SyntheticSpec};
use crate::embed::{self, EmbeddingSet};
use crate::error::{Error, ErrorKind, Result};
use crate::kmeans;
use crate::metrics;
use crate::neighbors::{self, NeighborTable};
use crate::rng::stage_seed;
use crate::scan::{self, Trained};
use crate::selflabel::{self, ClusterLabels, Naming, SelfLabelOutcome};
use crate::structure::{self, TransitionModel};

/// An error tagged with the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl StageError {
    pub fn kind(&self) -> ErrorKind {
        self.error.kind()
    }
}

trait InStage<T> {
    fn in_stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T> InStage<T> for Result<T> {
    fn in_stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

fn need<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("{key} is not set")))
}

/// `path` with `.suffix` inserted before its extension (`head.tsch` becomes
/// `head.agent.tsch`), or `path` itself.
pub fn suffixed(path: &Path, suffix: Option<&str>) -> PathBuf {
    let Some(s) = suffix else {
        return path.to_path_buf();
    };
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{s}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{s}"),
    };
    path.with_file_name(name)
}

/// Rows of the embedding set clustered together.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub role: Option<Speaker>,
    /// Added to local cluster ids to form global ones.
    pub offset: usize,
    pub indices: Vec<usize>,
}

impl Group {
    pub fn suffix(&self) -> Option<&'static str> {
        self.role.map(Speaker::as_str)
    }

    fn stream(&self, stage: &str) -> String {
        match self.suffix() {
            None => stage.to_string(),
            Some(s) => format!("{stage}:{s}"),
        }
    }
}

pub fn naming(cfg: &PipelineConfig) -> Naming {
    match cfg.mode {
        Mode::Joint => Naming::Joint,
        Mode::PerRole => Naming::PerRole {
            clusters_per_role: cfg.clusters,
        },
    }
}

/// Global cluster count: `C`, or `2C` with per-role heads.
pub fn total_clusters(cfg: &PipelineConfig) -> usize {
    match cfg.mode {
        Mode::Joint => cfg.clusters,
        Mode::PerRole => 2 * cfg.clusters,
    }
}

/// Splits rows of `set` into the groups clustered independently.
pub fn groups(
    cfg: &PipelineConfig,
    set: &EmbeddingSet,
    corpus: Option<&Corpus>,
) -> Result<Vec<Group>> {
    if cfg.mode == Mode::Joint {
        return Ok(vec![Group {
            role: None,
            offset: 0,
            indices: (0..set.len()).collect(),
        }]);
    }
    let corpus = corpus.ok_or_else(|| Error::Config("per_role mode needs the corpus".into()))?;
    let index = corpus.index();
    let mut agent = Vec::new();
    let mut user = Vec::new();
    for (i, id) in set.ids().iter().enumerate() {
        let u = index.get(id.as_str()).ok_or_else(|| Error::Missing {
            what: "corpus utterance",
            id: id.clone(),
        })?;
        match u.speaker {
            Speaker::Agent => agent.push(i),
            Speaker::User => user.push(i),
        }
    }
    let out = vec![
        Group {
            role: Some(Speaker::Agent),
            offset: 0,
            indices: agent,
        },
        Group {
            role: Some(Speaker::User),
            offset: cfg.clusters,
            indices: user,
        },
    ];
    if let Some(g) = out.iter().find(|g| g.indices.is_empty()) {
        return Err(Error::InvalidArgument(format!(
            "no {} utterances to cluster",
            g.suffix().unwrap_or("")
        )));
    }
    Ok(out)
}

fn load_optional_corpus(cfg: &PipelineConfig) -> Result<Option<Corpus>> {
    match (&cfg.corpus, cfg.mode) {
        (Some(p), Mode::PerRole) => corpus::load_corpus(p).map(Some),
        (None, Mode::PerRole) => Err(Error::Config("per_role mode needs the corpus".into())),
        _ => Ok(None),
    }
}

fn read_normalized(cfg: &PipelineConfig) -> Result<EmbeddingSet> {
    let set = embed::read_embeddings(need(&cfg.embeddings, "embeddings")?)?;
    set.require_normalized()?;
    Ok(set)
}

fn history_path(cfg: &PipelineConfig, head: &Path) -> PathBuf {
    cfg.history
        .clone()
        .unwrap_or_else(|| head.with_extension("history.tsv"))
}

/// Generates a synthetic corpus and its ground truth from the state machine
/// in `synthetic_transitions`.
pub fn gen_synthetic(cfg: &PipelineConfig) -> Result<(Corpus, GroundTruth)> {
    let spec = SyntheticSpec {
        transition_matrix: cfg.synthetic_matrix()?,
        templates_per_state: cfg.synthetic_templates,
        slot_vocab_size: cfg.synthetic_vocab,
        num_dialogs: cfg.synthetic_dialogs,
        seed: stage_seed(cfg.seed, "synthetic"),
    };
    let (c, t) = corpus::generate_synthetic(&spec)?;
    corpus::write_corpus(&c, need(&cfg.corpus, "corpus")?)?;
    corpus::write_truth(&t, need(&cfg.truth, "truth")?)?;
    Ok((c, t))
}

/// Hashed n-gram embeddings of `corpus`, written to `output`.
pub fn embed_hash(cfg: &PipelineConfig) -> Result<EmbeddingSet> {
    let c = corpus::load_corpus(need(&cfg.corpus, "corpus")?)?;
    let set = embed::hashed_ngram_embed(&c, cfg.embed_dim, stage_seed(cfg.seed, "embed-hash"))?;
    embed::write_embeddings(&set, need(&cfg.output, "output")?)?;
    Ok(set)
}

/// Unit-normalizes `embeddings` into `output`.
pub fn normalize(cfg: &PipelineConfig) -> Result<EmbeddingSet> {
    let set = embed::l2_normalize(&embed::read_embeddings(need(
        &cfg.embeddings,
        "embeddings",
    )?)?)?;
    embed::write_embeddings(&set, need(&cfg.output, "output")?)?;
    Ok(set)
}

/// Mines `k` neighbors per row of `embeddings` into `neighbors`.
pub fn mine(cfg: &PipelineConfig) -> Result<Vec<NeighborTable>> {
    let set = read_normalized(cfg)?;
    let c = load_optional_corpus(cfg)?;
    let out = need(&cfg.neighbors, "neighbors")?;
    let mut tables = Vec::new();
    for g in groups(cfg, &set, c.as_ref())? {
        let sub = set.subset(&g.indices)?;
        let table = neighbors::mine_neighbors(&sub, cfg.k)?;
        neighbors::write_neighbors(&table, sub.ids(), suffixed(out, g.suffix()))?;
        tables.push(table);
    }
    Ok(tables)
}

/// Trains a cluster head from `embeddings` and `neighbors`; writes `head`
/// and the loss history.
pub fn train(cfg: &PipelineConfig) -> Result<Vec<Trained>> {
    cfg.validate()?;
    let set = read_normalized(cfg)?;
    let c = load_optional_corpus(cfg)?;
    let nb = need(&cfg.neighbors, "neighbors")?;
    let head = need(&cfg.head, "head")?;
    let history = history_path(cfg, head);
    let mut out = Vec::new();
    for g in groups(cfg, &set, c.as_ref())? {
        let sub = set.subset(&g.indices)?;
        let table = neighbors::read_neighbors(suffixed(nb, g.suffix()), sub.ids())?;
        let config = cfg.train_config(stage_seed(cfg.seed, &g.stream("train")));
        let trained = scan::train(&sub, &table, cfg.clusters, &config)?;
        scan::write_head(&trained.head, suffixed(head, g.suffix()))?;
        structure::write_text(
            &scan::history_to_text(&trained.history),
            suffixed(&history, g.suffix()),
        )?;
        out.push(trained);
    }
    Ok(out)
}

fn assign_groups<'a>(
    set: &EmbeddingSet,
    groups: &[Group],
    heads: impl IntoIterator<Item = &'a scan::ClusterHead>,
) -> Result<AssignmentTable> {
    let mut local: HashMap<String, Assignment> = HashMap::new();
    for (g, head) in groups.iter().zip(heads) {
        let sub = set.subset(&g.indices)?;
        for (id, a) in scan::assign(head, &sub)?.iter() {
            local.insert(
                id.to_string(),
                Assignment {
                    cluster: a.cluster + g.offset,
                    confidence: a.confidence,
                },
            );
        }
    }
    // rows keep embedding order
    let mut table = AssignmentTable::new();
    for id in set.ids() {
        if let Some(a) = local.remove(id) {
            table.insert(id.clone(), a)?;
        }
    }
    Ok(table)
}

/// Self-labels the head at `head`, writing the fine-tuned head to `output`
/// and the prototype of every cluster to `labels`.
pub fn selflabel(cfg: &PipelineConfig) -> Result<(Vec<SelfLabelOutcome>, ClusterLabels)> {
    cfg.validate()?;
    let set = read_normalized(cfg)?;
    let c = corpus::load_corpus(need(&cfg.corpus, "corpus")?)?;
    let head_in = need(&cfg.head, "head")?;
    let head_out = need(&cfg.output, "output")?;
    let labels_out = need(&cfg.labels, "labels")?;
    let gs = groups(cfg, &set, Some(&c))?;
    let mut outcomes = Vec::new();
    for g in &gs {
        let sub = set.subset(&g.indices)?;
        let head = scan::read_head(suffixed(head_in, g.suffix()))?;
        let config = cfg.train_config(stage_seed(cfg.seed, &g.stream("self-label")));
        let outcome = selflabel::fine_tune_confident(
            &head,
            &sub,
            cfg.selflabel_threshold,
            cfg.selflabel_iterations,
            &config,
        )?;
        // the checkpoint stores f32, so label with exactly what later stages read back
        let stored = outcome.head.quantized();
        scan::write_head(&stored, suffixed(head_out, g.suffix()))?;
        outcomes.push(SelfLabelOutcome {
            head: stored,
            ..outcome
        });
    }
    let table = assign_groups(&set, &gs, outcomes.iter().map(|o| &o.head))?;
    let labels = selflabel::extract_prototypes_named(&table, &c, total_clusters(cfg), naming(cfg))?;
    selflabel::write_labels(&labels, labels_out)?;
    Ok((outcomes, labels))
}

/// Assigns every row of `embeddings` with the head at `head`.
pub fn assign(cfg: &PipelineConfig) -> Result<AssignmentTable> {
    let set = read_normalized(cfg)?;
    let c = load_optional_corpus(cfg)?;
    let head = need(&cfg.head, "head")?;
    let gs = groups(cfg, &set, c.as_ref())?;
    let heads = gs
        .iter()
        .map(|g| scan::read_head(suffixed(head, g.suffix())))
        .collect::<Result<Vec<_>>>()?;
    let table = assign_groups(&set, &gs, &heads)?;
    write_assignments(&table, need(&cfg.assignments, "assignments")?)?;
    Ok(table)
}

/// K-means baseline over `embeddings`, written to `assignments`.
pub fn kmeans_baseline(cfg: &PipelineConfig) -> Result<AssignmentTable> {
    cfg.validate()?;
    let set = read_normalized(cfg)?;
    let c = load_optional_corpus(cfg)?;
    let gs = groups(cfg, &set, c.as_ref())?;
    let mut local: HashMap<String, Assignment> = HashMap::new();
    for g in &gs {
        let sub = set.subset(&g.indices)?;
        let fit = kmeans::kmeans_restarts(
            &sub,
            cfg.clusters,
            stage_seed(cfg.seed, &g.stream("kmeans")),
            cfg.kmeans_restarts,
            cfg.kmeans_max_iters,
            cfg.kmeans_tol,
        )?;
        for (id, a) in fit.assignments.iter() {
            local.insert(
                id.to_string(),
                Assignment {
                    cluster: a.cluster + g.offset,
                    ..*a
                },
            );
        }
    }
    let mut table = AssignmentTable::new();
    for id in set.ids() {
        if let Some(a) = local.remove(id) {
            table.insert(id.clone(), a)?;
        }
    }
    write_assignments(&table, need(&cfg.assignments, "assignments")?)?;
    Ok(table)
}

/// Transition counts over `corpus` under `assignments`, written to
/// `transitions` as an edge list.
pub fn transitions(cfg: &PipelineConfig) -> Result<TransitionModel> {
    let c = corpus::load_corpus(need(&cfg.corpus, "corpus")?)?;
    let table = read_assignments(need(&cfg.assignments, "assignments")?)?;
    let model = structure::build_transitions(&c, &table)?;
    let names = naming(cfg);
    structure::write_text(
        &model.to_edge_list(|c| names.name(c)),
        need(&cfg.transitions, "transitions")?,
    )?;
    Ok(model)
}

/// Prunes the edge list at `transitions` and renders Graphviz text to
/// `output`.
pub fn graph(cfg: &PipelineConfig) -> Result<String> {
    cfg.validate()?;
    let path = need(&cfg.transitions, "transitions")?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let names = naming(cfg);
    let model = TransitionModel::from_edge_list(&text, |s| names.parse(s))?;
    let labels = selflabel::read_labels(need(&cfg.labels, "labels")?)?;
    let dot = structure::to_dot(&structure::prune(&model, cfg.prune_threshold)?, &labels)?;
    structure::write_text(&dot, need(&cfg.output, "output")?)?;
    Ok(dot)
}

/// Alignment accuracy with every block of `per_block` consecutive cluster
/// ids matched to the states on its own; per-role agent and user clusters
/// thus each get a full matching.
pub fn blockwise_alignment(
    table: &AssignmentTable,
    per_block: usize,
    truth: &GroundTruth,
) -> Result<f64> {
    let mut blocks: Vec<AssignmentTable> = Vec::new();
    for (id, a) in table.iter() {
        let b = a.cluster / per_block;
        if blocks.len() <= b {
            blocks.resize_with(b + 1, AssignmentTable::new);
        }
        blocks[b].insert(
            id,
            Assignment {
                cluster: a.cluster % per_block,
                confidence: a.confidence,
            },
        )?;
    }
    let mut matched = 0.0;
    for block in blocks.iter().filter(|b| !b.is_empty()) {
        matched += metrics::alignment_accuracy(block, truth)? * block.len() as f64;
    }
    Ok(matched / table.len() as f64)
}

/// Text report for one assignment table; the per-intent lines as TSV when
/// `truth` is given. `per_role` clusters are `clusters / 2` per speaker.
pub fn metrics_report(
    table: &AssignmentTable,
    clusters: usize,
    per_role: bool,
    truth: Option<&GroundTruth>,
) -> Result<(String, Option<String>)> {
    let dist = metrics::distribution_score(table, clusters)?;
    let mut out = String::new();
    let _ = writeln!(out, "utterances: {}", table.len());
    let _ = writeln!(out, "clusters: {clusters}");
    let _ = writeln!(out, "distribution score: {:.4}", dist.score);
    let _ = writeln!(out, "ideal score: {:.4}", dist.ideal);
    let _ = writeln!(out, "deviation: {:.4}", dist.deviation);
    let sizes: Vec<String> = dist.cluster_sizes.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "cluster sizes: {}", sizes.join(" "));
    let Some(truth) = truth else {
        return Ok((out, None));
    };
    let per_block = if per_role { clusters / 2 } else { clusters };
    let _ = writeln!(
        out,
        "alignment accuracy: {:.4}",
        blockwise_alignment(table, per_block, truth)?
    );
    let report = metrics::intent_confidence(table, &truth.intent_of, clusters)?;
    out.push_str(&report.to_text());
    Ok((out, Some(report.to_tsv())))
}

/// Scores `assignments`, writing the report to `output` and, with `truth`,
/// per-intent lines next to it with a `.tsv` extension.
pub fn metrics(cfg: &PipelineConfig) -> Result<String> {
    let table = read_assignments(need(&cfg.assignments, "assignments")?)?;
    let truth = match &cfg.truth {
        Some(p) => Some(corpus::load_truth(p)?),
        None => None,
    };
    let (text, tsv) = metrics_report(
        &table,
        total_clusters(cfg),
        cfg.mode == Mode::PerRole,
        truth.as_ref(),
    )?;
    let out = need(&cfg.output, "output")?;
    structure::write_text(&text, out)?;
    if let Some(tsv) = tsv {
        structure::write_text(&tsv, out.with_extension("tsv"))?;
    }
    Ok(text)
}

/// Hex SHA-256 of a file.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Files of a finished run, relative to `out_dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub artifacts: Vec<PathBuf>,
    pub manifest: PathBuf,
}

fn run_cfg(cfg: &PipelineConfig) -> PipelineConfig {
    let d = &cfg.out_dir;
    PipelineConfig {
        embeddings: Some(d.join("embeddings.tscn")),
        neighbors: Some(d.join("neighbors.tsv")),
        head: Some(d.join("head.tsch")),
        history: Some(d.join("history.tsv")),
        assignments: Some(d.join("assignments.tsv")),
        labels: Some(d.join("labels.tsv")),
        transitions: Some(d.join("transitions.tsv")),
        output: None,
        ..cfg.clone()
    }
}

/// Runs every stage from corpus to metrics into `out_dir` and writes a
/// manifest of the config and the digests of all inputs and outputs.
///
/// Embeddings come from `embeddings` when set, otherwise from the hashed
/// n-gram embedder.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary, StageError> {
    cfg.validate().in_stage("config")?;
    let corpus_path = need(&cfg.corpus, "corpus").in_stage("config")?;
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(dir, e))
        .in_stage("setup")?;
    let c = corpus::load_corpus(corpus_path).in_stage("load_corpus")?;
    let mut run = run_cfg(cfg);
    let mut written: Vec<PathBuf> = Vec::new();

    let raw = match &cfg.embeddings {
        Some(p) => embed::read_embeddings(p).in_stage("read_embeddings")?,
        None => {
            let raw_path = dir.join("embeddings.raw.tscn");
            let set = embed_hash(&PipelineConfig {
                output: Some(raw_path.clone()),
                ..run.clone()
            })
            .in_stage("embed_hash")?;
            written.extend([raw_path.clone(), embed::ids_path(&raw_path)]);
            set
        }
    };
    let index = c.index();
    let have: std::collections::HashSet<&str> = raw.ids().iter().map(String::as_str).collect();
    if let Some(u) = c.utterances().find(|u| !have.contains(u.id.as_str())) {
        return Err(Error::Missing {
            what: "embedding",
            id: u.id.clone(),
        })
        .in_stage("read_embeddings");
    }
    if let Some(id) = raw.ids().iter().find(|id| !index.contains_key(id.as_str())) {
        return Err(Error::Missing {
            what: "corpus utterance",
            id: id.clone(),
        })
        .in_stage("read_embeddings");
    }

    let emb = run.embeddings.clone().expect("set by run_cfg");
    let set = embed::l2_normalize(&raw).in_stage("normalize")?;
    embed::write_embeddings(&set, &emb).in_stage("normalize")?;
    written.extend([emb.clone(), embed::ids_path(&emb)]);

    let gs = groups(&run, &set, Some(&c)).in_stage("mine")?;
    let per_group = |p: &Option<PathBuf>| -> Vec<PathBuf> {
        let p = p.as_deref().expect("set by run_cfg");
        gs.iter().map(|g| suffixed(p, g.suffix())).collect()
    };

    mine(&run).in_stage("mine")?;
    written.extend(per_group(&run.neighbors));

    train(&run).in_stage("train")?;
    written.extend(per_group(&run.head));
    written.extend(per_group(&run.history));

    let final_head = dir.join("head.final.tsch");
    selflabel(&PipelineConfig {
        output: Some(final_head.clone()),
        ..run.clone()
    })
    .in_stage("selflabel")?;
    written.extend(per_group(&Some(final_head.clone())));
    written.push(run.labels.clone().expect("set by run_cfg"));

    run.head = Some(final_head);
    assign(&run).in_stage("assign")?;
    written.push(run.assignments.clone().expect("set by run_cfg"));

    let km = dir.join("kmeans_assignments.tsv");
    kmeans_baseline(&PipelineConfig {
        assignments: Some(km.clone()),
        ..run.clone()
    })
    .in_stage("kmeans")?;
    written.push(km.clone());

    transitions(&run).in_stage("transitions")?;
    written.push(run.transitions.clone().expect("set by run_cfg"));

    let dot = dir.join("graph.dot");
    graph(&PipelineConfig {
        output: Some(dot.clone()),
        ..run.clone()
    })
    .in_stage("graph")?;
    written.push(dot);

    for (table, name) in [
        (run.assignments.clone(), "metrics.txt"),
        (Some(km), "kmeans_metrics.txt"),
    ] {
        let out = dir.join(name);
        metrics(&PipelineConfig {
            assignments: table,
            output: Some(out.clone()),
            ..run.clone()
        })
        .in_stage("metrics")?;
        written.push(out.clone());
        if cfg.truth.is_some() {
            written.push(out.with_extension("tsv"));
        }
    }

    let manifest = write_manifest(cfg, &written).in_stage("manifest")?;
    let artifacts = written
        .iter()
        .map(|p| p.strip_prefix(dir).unwrap_or(p).to_path_buf())
        .collect();
    Ok(PipelineSummary {
        artifacts,
        manifest,
    })
}

fn write_manifest(cfg: &PipelineConfig, written: &[PathBuf]) -> Result<PathBuf> {
    let mut out = String::from("# config\n");
    out.push_str(&cfg.to_text());
    out.push_str("# inputs\n");
    let mut inputs: Vec<PathBuf> = [&cfg.corpus, &cfg.truth]
        .into_iter()
        .flatten()
        .cloned()
        .collect();
    if let Some(e) = &cfg.embeddings {
        inputs.extend([e.clone(), embed::ids_path(e)]);
    }
    for p in inputs {
        let _ = writeln!(out, "{}\t{}", p.display(), file_digest(&p)?);
    }
    out.push_str("# outputs\n");
    let mut rel: Vec<(PathBuf, &PathBuf)> = written
        .iter()
        .map(|p| (p.strip_prefix(&cfg.out_dir).unwrap_or(p).to_path_buf(), p))
        .collect();
    rel.sort();
    for (name, p) in rel {
        let _ = writeln!(out, "{}\t{}", name.display(), file_digest(p)?);
    }
    let path = cfg.out_dir.join("manifest.txt");
    structure::write_text(&out, &path)?;
    Ok(path)
}

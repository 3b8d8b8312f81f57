//! Command-line front end.
//!
//! Every subcommand accepts `--config FILE` plus one `--key value` flag per
//! config key; flags win over the file.

use std::ffi::OsString;

use clap::{Arg, ArgMatches, Command};

use crate::config::{PipelineConfig, KEYS};
use crate::error::{Error, ErrorKind};
use crate::pipeline::{self, StageError};

const SUBCOMMANDS: &[(&str, &str)] = &[
    (
        "gen-synthetic",
        "generate a synthetic corpus (corpus) and ground truth (truth)",
    ),
    (
        "embed-hash",
        "hashed n-gram embeddings of corpus into output",
    ),
    ("normalize", "unit-normalize embeddings into output"),
    (
        "mine",
        "mine nearest neighbors of embeddings into neighbors",
    ),
    (
        "train",
        "train a cluster head from embeddings and neighbors into head",
    ),
    (
        "selflabel",
        "fine-tune head on confident rows into output; prototypes into labels",
    ),
    ("assign", "assign embeddings with head into assignments"),
    ("kmeans", "K-means baseline of embeddings into assignments"),
    (
        "transitions",
        "transition edge list of corpus under assignments into transitions",
    ),
    (
        "graph",
        "prune transitions and render Graphviz text into output",
    ),
    (
        "metrics",
        "score assignments (against truth when given) into output",
    ),
    ("pipeline", "run every stage into out_dir"),
];

pub fn command() -> Command {
    let mut cmd = Command::new("tscan")
        .about("Dialog structure discovery by neighbor-consistent clustering")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("key=value config file"),
        );
    for (key, help) in KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(*key)
                .global(true)
                .value_name("VALUE")
                .help(*help),
        );
    }
    for (name, about) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(*name).about(*about));
    }
    cmd
}

/// Config file, then flags.
pub fn config_from_matches(matches: &ArgMatches) -> Result<PipelineConfig, Error> {
    let mut cfg = match matches.get_one::<String>("config") {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for (key, _) in KEYS {
        if let Some(v) = matches.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn stage(name: &'static str, r: Result<(), Error>) -> Result<(), StageError> {
    r.map_err(|error| StageError { stage: name, error })
}

/// Runs one subcommand.
pub fn dispatch(name: &str, cfg: &PipelineConfig) -> Result<(), StageError> {
    match name {
        "gen-synthetic" => stage("gen_synthetic", pipeline::gen_synthetic(cfg).map(drop)),
        "embed-hash" => stage("embed_hash", pipeline::embed_hash(cfg).map(drop)),
        "normalize" => stage("normalize", pipeline::normalize(cfg).map(drop)),
        "mine" => stage("mine", pipeline::mine(cfg).map(drop)),
        "train" => stage("train", pipeline::train(cfg).map(drop)),
        "selflabel" => stage("selflabel", pipeline::selflabel(cfg).map(drop)),
        "assign" => stage("assign", pipeline::assign(cfg).map(drop)),
        "kmeans" => stage("kmeans", pipeline::kmeans_baseline(cfg).map(drop)),
        "transitions" => stage("transitions", pipeline::transitions(cfg).map(drop)),
        "graph" => stage("graph", pipeline::graph(cfg).map(drop)),
        "metrics" => stage("metrics", pipeline::metrics(cfg).map(drop)),
        "pipeline" => pipeline::run_pipeline(cfg).map(drop),
        other => unreachable!("unregistered subcommand {other}"),
    }
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Input => 1,
        ErrorKind::Numeric => 2,
        ErrorKind::Config => 3,
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
/// Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit_code(ErrorKind::Config)
            } else {
                0
            };
        }
    };
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    let cfg = match config_from_matches(sub) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("tscan: stage config: {e}");
            return exit_code(e.kind());
        }
    };
    match dispatch(name, &cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("tscan: {e}");
            exit_code(e.kind())
        }
    }
}

//! Dialog structure discovery from unlabeled task-oriented dialogs.
//!
//! Utterance embeddings are clustered with a softmax head trained so that
//! each utterance and its mined nearest neighbors land in the same cluster,
//! while an entropy term keeps clusters balanced. Confident members then
//! fine-tune the head and name each cluster by its most typical utterance.
//! Cluster sequences over dialog turns give a transition graph between
//! dialog states, pruned and rendered as Graphviz text.
//!
//! ```no_run
//! use tscan::pipeline::{run_pipeline, PipelineConfig};
//!
//! let mut config = PipelineConfig::default();
//! config.corpus = Some("dialogs.jsonl".into());
//! config.out_dir = "out".into();
//! run_pipeline(&config).unwrap();
//! ```

pub mod assignments;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod kmeans;
pub mod metrics;
pub mod neighbors;
pub mod pipeline;
pub mod rng;
pub mod scan;
pub mod selflabel;
pub mod structure;

pub use assignments::{Assignment, AssignmentTable};
pub use corpus::{Corpus, Dialog, GroundTruth, Speaker, SyntheticSpec, Turn, Utterance};
pub use embed::EmbeddingSet;
pub use error::{Error, ErrorKind, Result};
pub use neighbors::NeighborTable;
pub use scan::{ClusterHead, LossBreakdown, TrainConfig};
pub use selflabel::{ClusterLabels, Naming};
pub use structure::{DialogGraph, Node, TransitionModel};

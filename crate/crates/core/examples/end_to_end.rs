//! Generates a synthetic corpus and runs every stage into one directory.
//!
//! cargo run --release --example end_to_end -- [OUT_DIR]

use std::path::PathBuf;

use tscan::config::Mode;
use tscan::pipeline::{gen_synthetic, run_pipeline, PipelineConfig};

fn main() {
    let out: PathBuf = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tscan-end-to-end"));
    let cfg = PipelineConfig {
        corpus: Some(out.join("corpus.jsonl")),
        truth: Some(out.join("truth.jsonl")),
        out_dir: out.join("run"),
        mode: Mode::PerRole,
        clusters: 5,
        learning_rate: 0.01,
        epochs: 50,
        synthetic_dialogs: 300,
        ..PipelineConfig::default()
    };
    if let Err(e) = std::fs::create_dir_all(&out)
        .map_err(|e| tscan::Error::io(&out, e))
        .and_then(|_| gen_synthetic(&cfg))
    {
        eprintln!("{e}");
        std::process::exit(1);
    }
    match run_pipeline(&cfg) {
        Ok(summary) => {
            println!(
                "wrote {} files under {}",
                summary.artifacts.len() + 1,
                cfg.out_dir.display()
            );
            print!(
                "{}",
                std::fs::read_to_string(cfg.out_dir.join("metrics.txt")).unwrap_or_default()
            );
            println!();
            print!(
                "{}",
                std::fs::read_to_string(cfg.out_dir.join("graph.dot")).unwrap_or_default()
            );
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(tscan::cli::exit_code(e.kind()));
        }
    }
}

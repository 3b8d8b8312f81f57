//! K-means++ with restarts as a baseline next to the trained head.
//!
//! cargo run --release --example kmeans_baseline

use tscan::corpus::{generate_synthetic, SyntheticSpec};
use tscan::embed::hashed_ngram_embed;
use tscan::kmeans::{kmeans_restarts, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use tscan::metrics::alignment_accuracy;

fn main() -> tscan::Result<()> {
    let spec = SyntheticSpec {
        transition_matrix: vec![
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.5, 0.5, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0],
        ],
        templates_per_state: 3,
        slot_vocab_size: 20,
        num_dialogs: 200,
        seed: 5,
    };
    let (c, truth) = generate_synthetic(&spec)?;
    let set = hashed_ngram_embed(&c, 256, 0)?;
    for restarts in [1, 5] {
        let fit = kmeans_restarts(&set, 4, 5, restarts, DEFAULT_MAX_ITERS, DEFAULT_TOL)?;
        println!(
            "restarts {restarts}: inertia {:.3} after {} iterations, alignment accuracy {:.4}",
            fit.inertia,
            fit.iterations_run,
            alignment_accuracy(&fit.assignments, &truth)?
        );
    }
    Ok(())
}

//! Sharpens a trained head on its own confident predictions, then names each
//! cluster after its most confident utterance.
//!
//! cargo run --release --example self_labeling

use tscan::corpus::{generate_synthetic, SyntheticSpec};
use tscan::embed::hashed_ngram_embed;
use tscan::neighbors::mine_neighbors;
use tscan::scan::{self, TrainConfig};
use tscan::selflabel::{extract_prototypes, fine_tune_confident};

fn main() -> tscan::Result<()> {
    let spec = SyntheticSpec {
        transition_matrix: vec![
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ],
        templates_per_state: 3,
        slot_vocab_size: 20,
        num_dialogs: 200,
        seed: 4,
    };
    let (c, _) = generate_synthetic(&spec)?;
    let set = hashed_ngram_embed(&c, 256, 0)?;
    let config = TrainConfig {
        learning_rate: 0.01,
        epochs: 50,
        seed: 4,
        ..TrainConfig::default()
    };
    let trained = scan::train(&set, &mine_neighbors(&set, 5)?, 3, &config)?;
    let outcome = fine_tune_confident(&trained.head, &set, 0.9, 4, &config)?;
    println!(
        "mean confidence {:.4} before self-labeling",
        outcome.initial_mean_confidence
    );
    for (i, step) in outcome.steps.iter().enumerate() {
        println!(
            "  iteration {}: {} confident rows, mean confidence {:.4}",
            i + 1,
            step.selected,
            step.mean_confidence
        );
    }
    let labels = extract_prototypes(&scan::assign(&outcome.head, &set)?, &c, 3)?;
    print!("\n{}", labels.to_text());
    Ok(())
}

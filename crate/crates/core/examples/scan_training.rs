//! Trains a cluster head on oracle embeddings and prints the loss curve.
//!
//! cargo run --release --example scan_training

use tscan::corpus::GroundTruth;
use tscan::embed::gaussian_oracle_embed;
use tscan::metrics::{alignment_accuracy, distribution_score};
use tscan::neighbors::mine_neighbors;
use tscan::scan::{self, TrainConfig};

fn main() -> tscan::Result<()> {
    let mut truth = GroundTruth::default();
    for i in 0..900 {
        truth.state_of.insert(format!("u{i:04}"), i % 3);
        truth
            .intent_of
            .insert(format!("u{i:04}"), format!("s{}", i % 3));
    }
    let set = gaussian_oracle_embed(&truth, 16, 1.0, 0.2, 3)?;
    let table = mine_neighbors(&set, 5)?;
    let config = TrainConfig {
        learning_rate: 0.01,
        epochs: 40,
        seed: 3,
        ..TrainConfig::default()
    };
    let trained = scan::train(&set, &table, 3, &config)?;
    for (epoch, l) in trained.history.iter().enumerate().step_by(5) {
        println!(
            "epoch {epoch:>2}: total {:+.4}  consistency {:.4}  entropy {:.4}",
            l.total, l.consistency, l.entropy
        );
    }
    let assigned = scan::assign(&trained.head, &set)?;
    println!(
        "alignment accuracy {:.4}",
        alignment_accuracy(&assigned, &truth)?
    );
    println!(
        "balance deviation  {:.4}",
        distribution_score(&assigned, 3)?.deviation
    );
    Ok(())
}

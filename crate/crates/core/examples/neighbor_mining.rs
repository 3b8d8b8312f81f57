//! Exact cosine nearest neighbors, and how often they share a latent state.
//!
//! cargo run --example neighbor_mining

use tscan::corpus::{generate_synthetic, SyntheticSpec};
use tscan::embed::hashed_ngram_embed;
use tscan::neighbors::mine_neighbors;

fn main() -> tscan::Result<()> {
    let spec = SyntheticSpec {
        transition_matrix: vec![
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ],
        templates_per_state: 3,
        slot_vocab_size: 20,
        num_dialogs: 100,
        seed: 2,
    };
    let (c, truth) = generate_synthetic(&spec)?;
    let set = hashed_ngram_embed(&c, 256, 0)?;
    for k in [1, 5, 20] {
        let table = mine_neighbors(&set, k)?;
        let mut same = 0;
        for (i, row) in table.rows().iter().enumerate() {
            let state = truth.state_of[&set.ids()[i]];
            same += row
                .iter()
                .filter(|n| truth.state_of[&set.ids()[n.index]] == state)
                .count();
        }
        println!(
            "k={k:>2}: {:.3} of neighbors share the anchor's state",
            same as f64 / (k * set.len()) as f64
        );
    }
    let table = mine_neighbors(&set, 3)?;
    println!("\nfirst rows of the neighbor file:");
    for line in table.to_text(set.ids()).lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}

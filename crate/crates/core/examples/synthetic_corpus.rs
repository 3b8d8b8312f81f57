//! Generates dialogs from a small state machine and round-trips them through
//! the JSON-lines corpus format.
//!
//! cargo run --example synthetic_corpus

use tscan::corpus::{self, generate_synthetic, SyntheticSpec};

fn main() -> tscan::Result<()> {
    // four states; the last column ends the dialog
    let spec = SyntheticSpec {
        transition_matrix: vec![
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.6, 0.4, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0],
        ],
        templates_per_state: 3,
        slot_vocab_size: 20,
        num_dialogs: 50,
        seed: 1,
    };
    let (c, truth) = generate_synthetic(&spec)?;
    println!(
        "{} dialogs, {} utterances",
        c.dialogs().len(),
        c.num_utterances()
    );

    let first = &c.dialogs()[0];
    println!("dialog {}:", first.id);
    for u in first.utterances() {
        println!(
            "  [{}] {:<5} state {}  {}",
            u.turn, u.speaker, truth.state_of[&u.id], u.text
        );
    }

    let dir = std::env::temp_dir().join("tscan-synthetic-corpus");
    std::fs::create_dir_all(&dir).map_err(|e| tscan::Error::io(&dir, e))?;
    let path = dir.join("corpus.jsonl");
    corpus::write_corpus(&c, &path)?;
    assert_eq!(corpus::load_corpus(&path)?, c);
    println!("round trip through {} ok", path.display());
    Ok(())
}

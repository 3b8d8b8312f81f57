//! The text-only embedder: signed hashing of word unigrams and bigrams.
//!
//! cargo run --example hashed_embeddings

use tscan::embed::{dot, hash_text};

fn main() {
    let texts = [
        "what date would you like to travel",
        "what date would you like to fly",
        "please confirm your seat number",
        "i want to leave on friday",
    ];
    let vecs: Vec<Vec<f64>> = texts
        .iter()
        .map(|t| hash_text(t, 256, 0).unwrap())
        .collect();
    println!("cosine similarities (dim 256):");
    for i in 0..texts.len() {
        for j in i + 1..texts.len() {
            println!(
                "  {:.3}  {:?} / {:?}",
                dot(&vecs[i], &vecs[j]),
                texts[i],
                texts[j]
            );
        }
    }
    // same text, same vector; the seed picks a different hash family
    assert_eq!(hash_text(texts[0], 256, 0), hash_text(texts[0], 256, 0));
    assert_ne!(hash_text(texts[0], 256, 0), hash_text(texts[0], 256, 1));
}

//! Turns multi-word labels into vectors from a small word table.

use zscomp::embeddings::{cosine, embed_label, EmbeddingTable, OovPolicy, TokenIndex};
use zscomp::vocab::{SourceKind, Vocabulary};

fn main() -> zscomp::error::Result<()> {
    let mut tokens = TokenIndex::new(3);
    tokens.insert("horse", &[1.0, 0.0, 0.2]);
    tokens.insert("riding", &[0.8, 0.4, 0.0]);
    tokens.insert("stable", &[0.6, 0.0, 0.8]);
    tokens.insert("ice cream", &[0.0, 1.0, 0.0]);

    for label in ["horse riding", "Horse_Riding", "ice cream", "stable"] {
        let e = embed_label(label, &tokens, OovPolicy::Zero)?;
        println!("{label:>14} -> {:?}", e.vector);
    }

    let actions = Vocabulary::new(SourceKind::Actions, ["horse riding", "skydiving"])?;
    let table = EmbeddingTable::from_tokens(actions, tokens, OovPolicy::Zero)?;
    for id in 0..table.len() {
        println!("{} oov={}", table.vocab().label(id), table.is_oov(id));
    }
    let stable = [0.6, 0.0, 0.8];
    println!("cos(horse riding, stable) = {:.4}", cosine(table.vector(0), &stable));
    Ok(())
}

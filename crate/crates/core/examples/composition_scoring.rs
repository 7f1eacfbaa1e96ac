//! Scores every object-scene pair against one action without building
//! the pair vectors.

use zscomp::composition::{CompositionRef, CompositionSpace, SpaceOptions};
use zscomp::embeddings::EmbeddingTable;
use zscomp::vocab::{SourceKind, Vocabulary};

fn table(kind: SourceKind, labels: &[&str], rows: Vec<Vec<f64>>) -> zscomp::error::Result<EmbeddingTable> {
    EmbeddingTable::from_vectors(Vocabulary::new(kind, labels.iter().copied())?, rows)
}

fn main() -> zscomp::error::Result<()> {
    let objects = table(
        SourceKind::Objects,
        &["surfboard", "wave", "umbrella"],
        vec![vec![1.0, 0.2, 0.0], vec![0.7, 0.7, 0.0], vec![0.0, 0.1, 1.0]],
    )?;
    let scenes = table(
        SourceKind::Scenes,
        &["ocean", "street"],
        vec![vec![0.5, 1.0, 0.0], vec![-0.2, 0.0, 0.9]],
    )?;
    let space = CompositionSpace::new(objects, scenes, SpaceOptions::default())?;
    let surfing = [1.0, 1.0, 0.0];

    let mut ranked = Vec::new();
    space.score_all_compositions(&surfing, |c, sim| ranked.push((sim, c)))?;
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (sim, c) in ranked {
        let w = space.composition_weight(c)?;
        println!(
            "{:>9} + {:<6} s={sim:+.4} weight={w:+.4}",
            space.objects().vocab().label(c.object),
            space.scenes().vocab().label(c.scene)
        );
    }

    let c = CompositionRef::new(0, 0);
    println!("explicit vector {:?}", space.composition_embedding(c)?);
    Ok(())
}

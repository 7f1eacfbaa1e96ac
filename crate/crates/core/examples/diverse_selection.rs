//! Compares the plain top-k with the diversified selection on a
//! generated problem.

use zscomp::composition::{CompositionSpace, SpaceOptions};
use zscomp::fixtures::{generate, FixtureSpec};
use zscomp::selection::{select_compositions, select_top_k_plain, ActionCompositionSet, SelectionConfig};

fn redundancy(space: &CompositionSpace, set: &ActionCompositionSet) -> f64 {
    let cs: Vec<_> = set.compositions().collect();
    let mut total = 0.0;
    let mut n = 0;
    for i in 0..cs.len() {
        for j in i + 1..cs.len() {
            total += space.composition_pair_similarity(cs[i], cs[j]).unwrap();
            n += 1;
        }
    }
    total / n.max(1) as f64
}

fn main() -> zscomp::error::Result<()> {
    let fx = generate(&FixtureSpec::default())?;
    let space = CompositionSpace::new(fx.objects.clone(), fx.scenes.clone(), SpaceOptions::default())?;
    let action = fx.actions.vector(0);
    let label = fx.actions.vocab().label(0);

    let plain = select_top_k_plain(&space, 0, action, 8)?;
    println!("{label}: plain redundancy {:.3}", redundancy(&space, &plain));
    for lambda in [0.9, 0.75, 0.5] {
        let cfg = SelectionConfig { k: 8, lambda, ..Default::default() };
        let set = select_compositions(&space, 0, action, &cfg, true)?;
        println!("{label}: lambda {lambda} redundancy {:.3}", redundancy(&space, &set));
        for m in set.members.iter().take(3) {
            println!(
                "    {} + {} s={:.3}",
                space.objects().vocab().label(m.composition.object),
                space.scenes().vocab().label(m.composition.scene),
                m.similarity
            );
        }
    }
    Ok(())
}

//! Classifies generated videos with every method and prints accuracy.

use zscomp::evaluation::accuracy;
use zscomp::fixtures::{generate, FixtureSpec};
use zscomp::inference::Method;

fn main() -> zscomp::error::Result<()> {
    let spec = FixtureSpec { seed: 7, ..Default::default() };
    let fx = generate(&spec)?;
    let engine = fx.engine(spec.params())?;
    for method in Method::ALL {
        let c = engine.classify(method, &fx.evidence(), None)?;
        println!("{:<32} {:.3}", method.name(), accuracy(&c.predictions, &fx.truth)?);
    }
    let c = engine.classify(Method::Compositions, &fx.evidence(), None)?;
    for p in c.predictions.iter().take(5) {
        println!("{} -> {} ({:.4})", p.video_id, p.action_label, p.score);
    }
    Ok(())
}

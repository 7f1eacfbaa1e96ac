//! Repeated accuracy over random action subsets, shared across methods.

use zscomp::evaluation::run_subset_trials;
use zscomp::fixtures::{generate, FixtureSpec};
use zscomp::inference::Method;

fn main() -> zscomp::error::Result<()> {
    let spec = FixtureSpec { num_actions: 12, num_videos: 120, ..Default::default() };
    let fx = generate(&spec)?;
    let engine = fx.engine(spec.params())?;
    for size in [3, 6, 12] {
        for method in [Method::ObjectOnly, Method::SceneOnly, Method::Compositions] {
            let c = engine.classify(method, &fx.evidence(), None)?;
            let r = run_subset_trials(&c.scores, &fx.truth, size, 10, 42)?;
            println!(
                "|A|={size:<3} {:<14} {:.3} ± {:.3}  first subset {}",
                method.name(),
                r.mean,
                r.std,
                r.trials[0].subset_hash
            );
        }
    }
    Ok(())
}

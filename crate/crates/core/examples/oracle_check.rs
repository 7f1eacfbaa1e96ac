//! Cross-checks the engine against the brute-force reference.

use zscomp::composition::SpaceOptions;
use zscomp::fixtures::{generate, FixtureSpec};
use zscomp::inference::Method;
use zscomp::oracle::check_against_engine;

fn main() -> zscomp::error::Result<()> {
    let spec = FixtureSpec::default();
    let fx = generate(&spec)?;
    let engine = fx.engine(spec.params())?;
    let report = check_against_engine(&engine, &fx.evidence(), &Method::ALL, SpaceOptions::default(), 1e-5)?;
    println!(
        "{} scores, {} predictions checked, max relative error {:.2e}",
        report.score_checks, report.prediction_checks, report.max_relative_error
    );
    println!("{}", if report.passed() { "agree" } else { "DISAGREE" });
    Ok(())
}

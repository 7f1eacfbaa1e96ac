//! Averages per-frame classifier output into one row per video and
//! reads off a composition likelihood.

use zscomp::probability::{composition_likelihood, FrameProbabilityBlock, ProbabilityMatrix};
use zscomp::vocab::{SourceKind, Vocabulary};

fn main() -> zscomp::error::Result<()> {
    let objects = Vocabulary::new(SourceKind::Objects, ["ball", "net", "racket"])?;
    let scenes = Vocabulary::new(SourceKind::Scenes, ["court", "beach"])?;

    let object_frames = vec![FrameProbabilityBlock {
        video_id: "clip1".into(),
        frames: vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.3, 0.5]],
    }];
    let scene_frames = vec![FrameProbabilityBlock {
        video_id: "clip1".into(),
        frames: vec![vec![0.9, 0.1], vec![0.7, 0.3]],
    }];
    let o = ProbabilityMatrix::from_frames(&objects, &object_frames)?;
    let s = ProbabilityMatrix::from_frames(&scenes, &scene_frames)?;
    println!("objects {:?}", o.row(0));
    println!("scenes  {:?}", s.row(0));

    for (oi, obj) in objects.labels().iter().enumerate() {
        for (si, scn) in scenes.labels().iter().enumerate() {
            let p = composition_likelihood(o.row(0), s.row(0), oi, si)?;
            println!("p({obj} + {scn}) = {p:.3}");
        }
    }
    Ok(())
}

//! Seeded synthetic instances with a planted object-scene structure.
//!
//! Each action gets one anchor object and one anchor scene. Its embedding
//! sits near the sum of the two anchor vectors, and the videos of the
//! action put extra probability mass on both anchors. Several actions share
//! each anchor object and each anchor scene, so only the pair identifies
//! the action.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::RunConfig;
use crate::embeddings::{write_word2vec_text, EmbeddingTable};
use crate::error::{Error, Result};
use crate::evaluation::{accuracy, trial_stream_seed, GroundTruth};
use crate::inference::{Evidence, Method};
use crate::pipeline::{Engine, EngineParams};
use crate::probability::{MatrixFormat, ProbabilityMatrix};
use crate::vocab::{SourceKind, Vocabulary};

pub const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FixtureSpec {
    pub num_objects: usize,
    pub num_scenes: usize,
    pub num_actions: usize,
    pub num_videos: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            num_objects: 20,
            num_scenes: 15,
            num_actions: 10,
            num_videos: 50,
            dim: 16,
            seed: 0,
        }
    }
}

impl FixtureSpec {
    /// Parses `OxSxA` or `OxSxAxV`.
    pub fn parse_size(size: &str, seed: u64) -> Result<Self> {
        let parts: Vec<usize> = size
            .split(['x', 'X', '×'])
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::config("size", format!("expected OxSxA or OxSxAxV, got {size:?}")))?;
        let (o, s, a, v) = match parts[..] {
            [o, s, a] => (o, s, a, (5 * a).max(1)),
            [o, s, a, v] => (o, s, a, v),
            _ => return Err(Error::config("size", format!("expected OxSxA or OxSxAxV, got {size:?}"))),
        };
        let spec = Self {
            num_objects: o,
            num_scenes: s,
            num_actions: a,
            num_videos: v,
            seed,
            ..Self::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, n) in [
            ("num_objects", self.num_objects),
            ("num_scenes", self.num_scenes),
            ("num_actions", self.num_actions),
            ("num_videos", self.num_videos),
            ("dim", self.dim),
        ] {
            if n == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        Ok(())
    }

    /// Selection parameters scaled to the fixture.
    pub fn params(&self) -> EngineParams {
        EngineParams {
            k_objects: 3.min(self.num_objects),
            k_scenes: 2.min(self.num_scenes),
            k_concatenation: 5.min(self.num_objects + self.num_scenes),
            k_compositions: 10.min(self.num_objects * self.num_scenes),
            ..EngineParams::default()
        }
    }

    /// Anchor object grid width and scene grid height.
    fn grid(&self) -> (usize, usize) {
        let a = self.num_actions;
        let m_o = ((a as f64).sqrt().ceil() as usize).clamp(1, self.num_objects);
        let m_s = a.div_ceil(m_o).clamp(1, self.num_scenes);
        (m_o, m_s)
    }

    pub fn anchors(&self, action: usize) -> (usize, usize) {
        let (m_o, m_s) = self.grid();
        (action % m_o, (action / m_o) % m_s)
    }

    /// Whether the ordering compositions > objects, scenes can be demanded:
    /// at least two actions, two objects and two scenes.
    pub fn ordering_is_checkable(&self) -> bool {
        self.num_actions >= 2 && self.num_objects >= 2 && self.num_scenes >= 2
    }
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len().max(3);
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

/// A generated instance, kept in memory.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub spec: FixtureSpec,
    /// The attempt whose sample passed the ordering check.
    pub attempt: usize,
    pub actions: EmbeddingTable,
    pub objects: EmbeddingTable,
    pub scenes: EmbeddingTable,
    pub object_probs: ProbabilityMatrix,
    pub scene_probs: ProbabilityMatrix,
    pub truth: GroundTruth,
    pub accuracies: Vec<(Method, f64)>,
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// A probability row with half its mass on `anchor` and the rest spread
/// at random.
fn planted_row(rng: &mut ChaCha8Rng, n: usize, anchor: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw.iter().map(|x| 0.5 * x / total).collect();
    row[anchor] += 0.5;
    row
}

fn sample(spec: &FixtureSpec, attempt: usize) -> Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_stream_seed(spec.seed, attempt));
    let d = spec.dim;
    let object_vocab = Vocabulary::new(SourceKind::Objects, labels("obj", spec.num_objects))?;
    let scene_vocab = Vocabulary::new(SourceKind::Scenes, labels("scn", spec.num_scenes))?;
    let action_vocab = Vocabulary::new(SourceKind::Actions, labels("act", spec.num_actions))?;

    let object_vecs: Vec<Vec<f64>> = (0..spec.num_objects).map(|_| gaussian(&mut rng, d)).collect();
    let scene_vecs: Vec<Vec<f64>> = (0..spec.num_scenes).map(|_| gaussian(&mut rng, d)).collect();
    let action_vecs: Vec<Vec<f64>> = (0..spec.num_actions)
        .map(|a| {
            let (o, s) = spec.anchors(a);
            let noise = gaussian(&mut rng, d);
            (0..d)
                .map(|i| object_vecs[o][i] + scene_vecs[s][i] + 0.5 * noise[i])
                .collect()
        })
        .collect();

    let video_ids = labels("vid", spec.num_videos);
    let mut po = Vec::with_capacity(spec.num_videos * spec.num_objects);
    let mut ps = Vec::with_capacity(spec.num_videos * spec.num_scenes);
    let mut truth = Vec::with_capacity(spec.num_videos);
    for (v, id) in video_ids.iter().enumerate() {
        let a = v % spec.num_actions;
        let (o, s) = spec.anchors(a);
        po.extend(planted_row(&mut rng, spec.num_objects, o));
        ps.extend(planted_row(&mut rng, spec.num_scenes, s));
        truth.push((id.clone(), a));
    }

    let object_probs = ProbabilityMatrix::new(&object_vocab, video_ids.clone(), po, false)?;
    let scene_probs = ProbabilityMatrix::new(&scene_vocab, video_ids, ps, false)?;
    let truth = GroundTruth::new(truth, &action_vocab)?;
    Ok(Fixture {
        spec: *spec,
        attempt,
        actions: EmbeddingTable::from_vectors(action_vocab, action_vecs)?,
        objects: EmbeddingTable::from_vectors(object_vocab, object_vecs)?,
        scenes: EmbeddingTable::from_vectors(scene_vocab, scene_vecs)?,
        object_probs,
        scene_probs,
        truth,
        accuracies: Vec::new(),
    })
}

impl Fixture {
    pub fn evidence(&self) -> Evidence<'_> {
        Evidence {
            objects: Some(&self.object_probs),
            scenes: Some(&self.scene_probs),
        }
    }

    /// An engine with the fixture's parameters and a built space.
    pub fn engine(&self, params: EngineParams) -> Result<Engine> {
        let mut e = Engine::new(
            self.actions.clone(),
            Some(self.objects.clone()),
            Some(self.scenes.clone()),
            params,
        )?;
        e.build_space(Default::default(), None)?;
        Ok(e)
    }

    pub fn accuracy_of(&self, method: Method) -> Option<f64> {
        self.accuracies.iter().find(|(m, _)| *m == method).map(|&(_, a)| a)
    }

    /// Writes the fixture and a matching `config.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<RunConfig> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let file = |name: &str| dir.join(name);
        self.objects.vocab().save(file("objects.txt"))?;
        self.scenes.vocab().save(file("scenes.txt"))?;
        self.actions.vocab().save(file("actions.txt"))?;
        let rows = [&self.objects, &self.scenes, &self.actions].into_iter().flat_map(|t| {
            t.vocab()
                .labels()
                .iter()
                .enumerate()
                .map(move |(i, l)| (l.as_str(), t.vector(i)))
        });
        write_word2vec_text(&file("embeddings.txt"), self.spec.dim, rows)?;
        self.object_probs.save(&file("object_probs.csv"), MatrixFormat::Csv)?;
        self.scene_probs.save(&file("scene_probs.csv"), MatrixFormat::Csv)?;
        self.truth.save(&file("truth.csv"), self.actions.vocab())?;

        let p = self.spec.params();
        let rel = |name: &str| Some(PathBuf::from(name));
        let cfg = RunConfig {
            action_vocab: rel("actions.txt"),
            object_vocab: rel("objects.txt"),
            scene_vocab: rel("scenes.txt"),
            action_embeddings: rel("embeddings.txt"),
            object_embeddings: rel("embeddings.txt"),
            scene_embeddings: rel("embeddings.txt"),
            object_probs: rel("object_probs.csv"),
            scene_probs: rel("scene_probs.csv"),
            ground_truth: rel("truth.csv"),
            k_objects: p.k_objects,
            k_scenes: p.k_scenes,
            k_concatenation: p.k_concatenation,
            k_compositions: p.k_compositions,
            seed: self.spec.seed,
            ..RunConfig::default()
        };
        let mut json = serde_json::to_string_pretty(&cfg)?;
        json.push('\n');
        std::fs::write(file("config.json"), json).map_err(|e| Error::io(file("config.json"), e))?;
        Ok(cfg)
    }
}

/// Samples instances until composition accuracy strictly beats both
/// single-source baselines, giving up after [`MAX_ATTEMPTS`].
pub fn generate(spec: &FixtureSpec) -> Result<Fixture> {
    spec.validate()?;
    let params = spec.params();
    for attempt in 0..MAX_ATTEMPTS {
        let mut fixture = sample(spec, attempt)?;
        let engine = fixture.engine(params)?;
        let mut accuracies = Vec::new();
        for method in [Method::Compositions, Method::ObjectOnly, Method::SceneOnly] {
            let out = engine.classify(method, &fixture.evidence(), None)?;
            accuracies.push((method, accuracy(&out.predictions, &fixture.truth)?));
        }
        fixture.accuracies = accuracies;
        let acc = |m| fixture.accuracy_of(m).unwrap_or(0.0);
        let ordered = acc(Method::Compositions) > acc(Method::ObjectOnly) && acc(Method::Compositions) > acc(Method::SceneOnly);
        if ordered || !spec.ordering_is_checkable() {
            return Ok(fixture);
        }
        log::debug!("fixture attempt {attempt} rejected: {:?}", fixture.accuracies);
    }
    Err(Error::Data(format!(
        "no sample in {MAX_ATTEMPTS} attempts had compositions ahead of both baselines"
    )))
}

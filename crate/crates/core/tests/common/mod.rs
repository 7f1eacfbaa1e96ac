#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use zscomp::embeddings::EmbeddingTable;
use zscomp::inference::Evidence;
use zscomp::probability::ProbabilityMatrix;
use zscomp::vocab::{SourceKind, Vocabulary};

pub fn gaussian_table(rng: &mut ChaCha8Rng, kind: SourceKind, prefix: &str, n: usize, d: usize) -> EmbeddingTable {
    let vocab = Vocabulary::new(kind, (0..n).map(|i| format!("{prefix}{i}"))).unwrap();
    let vectors = (0..n)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    EmbeddingTable::from_vectors(vocab, vectors).unwrap()
}

pub fn stochastic_matrix(rng: &mut ChaCha8Rng, vocab: &Vocabulary, videos: usize) -> ProbabilityMatrix {
    let n = vocab.len();
    let mut values = Vec::with_capacity(videos * n);
    for _ in 0..videos {
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3) + 1e-6).collect();
        let total: f64 = raw.iter().sum();
        values.extend(raw.iter().map(|x| x / total));
    }
    let ids = (0..videos).map(|v| format!("v{v:03}")).collect();
    ProbabilityMatrix::new(vocab, ids, values, false).unwrap()
}

pub struct Instance {
    pub actions: EmbeddingTable,
    pub objects: EmbeddingTable,
    pub scenes: EmbeddingTable,
    pub object_probs: ProbabilityMatrix,
    pub scene_probs: ProbabilityMatrix,
}

impl Instance {
    pub fn evidence(&self) -> Evidence<'_> {
        Evidence {
            objects: Some(&self.object_probs),
            scenes: Some(&self.scene_probs),
        }
    }
}

/// Unstructured Gaussian embeddings and random stochastic rows.
pub fn random_instance(seed: u64, objects: usize, scenes: usize, actions: usize, videos: usize, d: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objects = gaussian_table(&mut rng, SourceKind::Objects, "o", objects, d);
    let scenes = gaussian_table(&mut rng, SourceKind::Scenes, "s", scenes, d);
    let actions = gaussian_table(&mut rng, SourceKind::Actions, "a", actions, d);
    let object_probs = stochastic_matrix(&mut rng, objects.vocab(), videos);
    let scene_probs = stochastic_matrix(&mut rng, scenes.vocab(), videos);
    Instance {
        actions,
        objects,
        scenes,
        object_probs,
        scene_probs,
    }
}

/// Peak resident set size of this process.
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// File contents with any `generated_at_unix` line dropped.
pub fn without_timestamps(path: &Path) -> Vec<u8> {
    let bytes = std::fs::read(path).unwrap();
    if path.extension().is_some_and(|e| e == "json") {
        let text = String::from_utf8(bytes).unwrap();
        text.lines()
            .filter(|l| !l.contains("\"generated_at_unix\""))
            .collect::<Vec<_>>()
            .join("\n")
            .into_bytes()
    } else {
        bytes
    }
}

/// Relative path → normalized contents for every file under `dir`.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, without_timestamps(&p)));
            }
        }
    }
    out.sort();
    out
}

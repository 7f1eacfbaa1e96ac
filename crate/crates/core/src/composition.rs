//! The object × scene composition space.
//!
//! A composition embeds as the sum of its object and scene vectors. The
//! space never materializes those sums: cosine similarities are assembled
//! from per-member dot products and two `|O| × |S|` scalar caches, the pair
//! norms `‖φ_o + φ_s‖` and the cross dots `⟨φ_o, φ_s⟩`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binio;
use crate::embeddings::{dot, norm, EmbeddingTable};
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"ZSPC";
pub const CACHE_VERSION: u32 = 1;

/// Squared pair norms at or below this fraction of `‖φ_o‖² + ‖φ_s‖²` count
/// as cancelled.
const CANCELLATION_EPS: f64 = 1e-12;

/// One object paired with one scene. Orders lexicographically by
/// `(object, scene)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CompositionRef {
    pub object: usize,
    pub scene: usize,
}

impl CompositionRef {
    pub fn new(object: usize, scene: usize) -> Self {
        Self { object, scene }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceOptions {
    /// Scale object and scene vectors to unit norm before summing.
    pub normalize_before_sum: bool,
    /// Drop compositions whose object and scene carry the same label.
    pub exclude_self_pairs: bool,
}

/// Per-action dot products against every object and scene.
#[derive(Debug, Clone)]
pub struct ActionProfile {
    object_dots: Vec<f64>,
    scene_dots: Vec<f64>,
    norm: f64,
}

impl ActionProfile {
    pub fn norm(&self) -> f64 {
        self.norm
    }
}

pub struct CompositionSpace {
    objects: EmbeddingTable,
    scenes: EmbeddingTable,
    options: SpaceOptions,
    /// For each object, the scene id carrying the same label, if any.
    self_scene: Vec<Option<usize>>,
    pair_norms: Vec<f64>,
    cross_dots: Vec<f64>,
    degenerate: AtomicU64,
}

impl std::fmt::Debug for CompositionSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompositionSpace")
            .field("objects", &self.objects.len())
            .field("scenes", &self.scenes.len())
            .field("dim", &self.objects.dim())
            .field("options", &self.options)
            .finish()
    }
}

impl CompositionSpace {
    /// Builds the space and its pair caches.
    pub fn new(objects: EmbeddingTable, scenes: EmbeddingTable, options: SpaceOptions) -> Result<Self> {
        let mut space = Self::unbuilt(objects, scenes, options)?;
        let (norms, cross) = space.compute_caches();
        space.pair_norms = norms;
        space.cross_dots = cross;
        Ok(space)
    }

    /// Builds the space around caches read from a `ZSPC` file.
    pub fn with_cache_file(
        objects: EmbeddingTable,
        scenes: EmbeddingTable,
        options: SpaceOptions,
        path: &Path,
    ) -> Result<Self> {
        let mut space = Self::unbuilt(objects, scenes, options)?;
        let (norms, cross) = read_cache(path, space.num_objects(), space.num_scenes())?;
        space.pair_norms = norms;
        space.cross_dots = cross;
        Ok(space)
    }

    fn unbuilt(objects: EmbeddingTable, scenes: EmbeddingTable, options: SpaceOptions) -> Result<Self> {
        if objects.dim() != scenes.dim() {
            return Err(Error::Schema(format!(
                "object dimension {} differs from scene dimension {}",
                objects.dim(),
                scenes.dim()
            )));
        }
        let (objects, scenes) = if options.normalize_before_sum {
            (objects.normalized(), scenes.normalized())
        } else {
            (objects, scenes)
        };
        let self_scene = objects
            .vocab()
            .labels()
            .iter()
            .map(|label| {
                options
                    .exclude_self_pairs
                    .then(|| scenes.vocab().id(label))
                    .flatten()
            })
            .collect();
        Ok(Self {
            objects,
            scenes,
            options,
            self_scene,
            pair_norms: Vec::new(),
            cross_dots: Vec::new(),
            degenerate: AtomicU64::new(0),
        })
    }

    fn compute_caches(&self) -> (Vec<f64>, Vec<f64>) {
        let n_s = self.num_scenes();
        let mut norms = vec![0.0; self.num_objects() * n_s];
        let mut cross = vec![0.0; self.num_objects() * n_s];
        if n_s == 0 {
            return (norms, cross);
        }
        norms
            .par_chunks_mut(n_s)
            .zip(cross.par_chunks_mut(n_s))
            .enumerate()
            .for_each(|(o, (norm_row, cross_row))| {
                let ov = self.objects.vector(o);
                let on2 = self.objects.norm(o).powi(2);
                for s in 0..n_s {
                    let c = dot(ov, self.scenes.vector(s));
                    cross_row[s] = c;
                    norm_row[s] = pair_norm_from(on2, self.scenes.norm(s).powi(2), c);
                }
            });
        (norms, cross)
    }

    /// Writes the pair caches as a `ZSPC` file.
    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        binio::write_header(&mut w, CACHE_MAGIC, CACHE_VERSION).map_err(io)?;
        binio::write_u64(&mut w, self.num_objects() as u64).map_err(io)?;
        binio::write_u64(&mut w, self.num_scenes() as u64).map_err(io)?;
        binio::write_f32s(&mut w, self.pair_norms.iter().copied()).map_err(io)?;
        binio::write_f32s(&mut w, self.cross_dots.iter().copied()).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn objects(&self) -> &EmbeddingTable {
        &self.objects
    }

    pub fn scenes(&self) -> &EmbeddingTable {
        &self.scenes
    }

    pub fn options(&self) -> SpaceOptions {
        self.options
    }

    pub fn dim(&self) -> usize {
        self.objects.dim()
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn num_scenes(&self) -> usize {
        self.scenes.len()
    }

    /// Number of compositions, excluded self-pairs not counted.
    pub fn len(&self) -> usize {
        self.num_objects() * self.num_scenes() - self.self_scene.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether `c` is in range and not an excluded self-pair.
    pub fn contains(&self, c: CompositionRef) -> bool {
        c.object < self.num_objects() && c.scene < self.num_scenes() && self.self_scene[c.object] != Some(c.scene)
    }

    fn check(&self, c: CompositionRef) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "composition ({}, {}) is not in the {}×{} space",
                c.object,
                c.scene,
                self.num_objects(),
                self.num_scenes()
            )))
        }
    }

    #[inline]
    fn cell(&self, object: usize, scene: usize) -> usize {
        object * self.num_scenes() + scene
    }

    /// ‖φ_o + φ_s‖ from the cache.
    #[inline]
    pub fn pair_norm(&self, c: CompositionRef) -> f64 {
        self.pair_norms[self.cell(c.object, c.scene)]
    }

    /// ⟨φ_o, φ_s⟩ from the cache.
    #[inline]
    pub fn cross_dot(&self, object: usize, scene: usize) -> f64 {
        self.cross_dots[self.cell(object, scene)]
    }

    /// Number of similarities that fell back to 0 because a norm vanished.
    pub fn degeneracy_count(&self) -> u64 {
        self.degenerate.load(Ordering::Relaxed)
    }

    fn flag_degenerate(&self, n: u64) {
        if n > 0 {
            self.degenerate.fetch_add(n, Ordering::Relaxed);
        }
    }

    /// φ(c) = φ(c_o) + φ(c_s), materialized for a single composition.
    pub fn composition_embedding(&self, c: CompositionRef) -> Result<Vec<f64>> {
        self.check(c)?;
        Ok(self
            .objects
            .vector(c.object)
            .iter()
            .zip(self.scenes.vector(c.scene))
            .map(|(o, s)| o + s)
            .collect())
    }

    pub fn action_profile(&self, action: &[f64]) -> Result<ActionProfile> {
        if action.len() != self.dim() {
            return Err(Error::Schema(format!(
                "action vector has {} components, space has {}",
                action.len(),
                self.dim()
            )));
        }
        if let Some(x) = action.iter().find(|x| !x.is_finite()) {
            return Err(Error::Argument(format!("non-finite action component {x}")));
        }
        Ok(ActionProfile {
            object_dots: self.objects.iter().map(|v| dot(v, action)).collect(),
            scene_dots: self.scenes.iter().map(|v| dot(v, action)).collect(),
            norm: norm(action),
        })
    }

    /// cos(φ_o + φ_s, φ_a) from profile dot products and the pair norm.
    #[inline]
    pub fn profiled_similarity(&self, profile: &ActionProfile, c: CompositionRef) -> Option<f64> {
        let denom = self.pair_norm(c) * profile.norm;
        if denom == 0.0 {
            return None;
        }
        let num = profile.object_dots[c.object] + profile.scene_dots[c.scene];
        Some((num / denom).clamp(-1.0, 1.0))
    }

    /// s(c, a) for one composition.
    pub fn action_similarity(&self, c: CompositionRef, action: &[f64]) -> Result<f64> {
        self.check(c)?;
        if action.len() != self.dim() {
            return Err(Error::Schema("action dimension mismatch".into()));
        }
        let denom = self.pair_norm(c) * norm(action);
        if denom == 0.0 {
            self.flag_degenerate(1);
            return Ok(0.0);
        }
        let num = dot(self.objects.vector(c.object), action) + dot(self.scenes.vector(c.scene), action);
        Ok((num / denom).clamp(-1.0, 1.0))
    }

    /// Calls `sink` with the similarity of every composition to the action,
    /// in row-major `(object, scene)` order.
    pub fn score_all_compositions<F>(&self, action: &[f64], mut sink: F) -> Result<()>
    where
        F: FnMut(CompositionRef, f64),
    {
        if self.pair_norms.len() != self.num_objects() * self.num_scenes() {
            return Err(Error::Internal("pair cache does not match the tables".into()));
        }
        let profile = self.action_profile(action)?;
        let mut degenerate = 0;
        for o in 0..self.num_objects() {
            let skip = self.self_scene[o];
            for s in 0..self.num_scenes() {
                if skip == Some(s) {
                    continue;
                }
                let c = CompositionRef::new(o, s);
                let sim = self.profiled_similarity(&profile, c).unwrap_or_else(|| {
                    degenerate += 1;
                    0.0
                });
                sink(c, sim);
            }
        }
        self.flag_degenerate(degenerate);
        Ok(())
    }

    /// ⟨φ(c1), φ(c2)⟩ from the four member dot products.
    fn pair_dot(&self, c1: CompositionRef, c2: CompositionRef) -> f64 {
        dot(self.objects.vector(c1.object), self.objects.vector(c2.object))
            + self.cross_dot(c1.object, c2.scene)
            + self.cross_dot(c2.object, c1.scene)
            + dot(self.scenes.vector(c1.scene), self.scenes.vector(c2.scene))
    }

    /// s(c1, c2), the cosine between two summed composition vectors.
    pub fn composition_pair_similarity(&self, c1: CompositionRef, c2: CompositionRef) -> Result<f64> {
        self.check(c1)?;
        self.check(c2)?;
        let denom = self.pair_norm(c1) * self.pair_norm(c2);
        if denom == 0.0 {
            self.flag_degenerate(1);
            return Ok(0.0);
        }
        if c1 == c2 {
            return Ok(1.0);
        }
        Ok((self.pair_dot(c1, c2) / denom).clamp(-1.0, 1.0))
    }

    /// cos(φ_o, φ_s), the prior weight of a composition.
    pub fn composition_weight(&self, c: CompositionRef) -> Result<f64> {
        self.check(c)?;
        Ok(self.weight_unchecked(c))
    }

    #[inline]
    pub(crate) fn weight_unchecked(&self, c: CompositionRef) -> f64 {
        let denom = self.objects.norm(c.object) * self.scenes.norm(c.scene);
        if denom == 0.0 {
            return 0.0;
        }
        (self.cross_dot(c.object, c.scene) / denom).clamp(-1.0, 1.0)
    }
}

#[inline]
fn pair_norm_from(object_sq: f64, scene_sq: f64, cross: f64) -> f64 {
    let sq = object_sq + scene_sq + 2.0 * cross;
    if sq <= CANCELLATION_EPS * (object_sq + scene_sq) {
        0.0
    } else {
        sq.sqrt()
    }
}

fn read_cache(path: &Path, objects: usize, scenes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |message: String| Error::Format {
        path: path.to_owned(),
        line: 0,
        message,
    };
    binio::read_header(&mut r, CACHE_MAGIC, CACHE_VERSION).map_err(|e| bad(e.to_string()))?;
    let o = binio::read_u64(&mut r).map_err(|e| Error::io(path, e))? as usize;
    let s = binio::read_u64(&mut r).map_err(|e| Error::io(path, e))? as usize;
    if (o, s) != (objects, scenes) {
        return Err(Error::Schema(format!(
            "cache is {o}×{s}, tables are {objects}×{scenes}"
        )));
    }
    let norms = binio::read_f32s(&mut r, o * s).map_err(|e| Error::io(path, e))?;
    let cross = binio::read_f32s(&mut r, o * s).map_err(|e| Error::io(path, e))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(bad("trailing bytes after cross dots".into()));
    }
    Ok((norms, cross))
}

//! Per-action support sets: top-k compositions, plain or diversified with
//! Maximum Marginal Relevance, and top-k single-source labels.
//!
//! Ties are broken everywhere by the smaller id; for compositions that is
//! the lexicographically smaller `(object, scene)` pair.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::composition::{ActionProfile, CompositionRef, CompositionSpace};
use crate::embeddings::{dot, norm, EmbeddingTable};
use crate::error::{Error, Result};
use crate::topk::{Scored, TopK};

pub const DEFAULT_LAMBDA: f64 = 0.75;
pub const DEFAULT_K_COMPOSITIONS: usize = 250;
pub const DEFAULT_K_OBJECTS: usize = 100;
pub const DEFAULT_K_SCENES: usize = 5;
pub const DEFAULT_K_CONCATENATION: usize = 100;

/// Size of the relevance-ranked candidate pool that MMR diversifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolSize {
    Full,
    Limited(usize),
}

impl PoolSize {
    /// `max(50·k, 5000)`.
    pub fn default_for(k: usize) -> Self {
        PoolSize::Limited((50 * k).max(5000))
    }
}

impl fmt::Display for PoolSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolSize::Full => f.write_str("full"),
            PoolSize::Limited(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for PoolSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(PoolSize::Full);
        }
        s.parse()
            .map(PoolSize::Limited)
            .map_err(|_| Error::config("pool_size", format!("expected \"full\" or a count, got {s:?}")))
    }
}

impl Serialize for PoolSize {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PoolSize::Full => ser.serialize_str("full"),
            PoolSize::Limited(n) => ser.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for PoolSize {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(usize),
            Name(String),
        }
        match Repr::deserialize(de)? {
            Repr::Count(n) => Ok(PoolSize::Limited(n)),
            Repr::Name(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub k: usize,
    pub lambda: f64,
    /// `None` picks [`PoolSize::default_for`].
    pub pool_size: Option<PoolSize>,
    /// Rank candidates by `s(c, a) · cos(φ_o, φ_s)` instead of `s(c, a)`.
    pub weighted: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K_COMPOSITIONS,
            lambda: DEFAULT_LAMBDA,
            pool_size: None,
            weighted: false,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config("lambda", format!("{} is outside [0, 1]", self.lambda)));
        }
        if let Some(PoolSize::Limited(n)) = self.pool_size {
            if n < self.k {
                return Err(Error::config("pool_size", format!("{n} is smaller than k = {}", self.k)));
            }
        }
        Ok(())
    }

    pub fn pool(&self) -> PoolSize {
        self.pool_size.unwrap_or_else(|| PoolSize::default_for(self.k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SelectionMode {
    Plain,
    Mmr { lambda: f64, pool_size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Member {
    pub composition: CompositionRef,
    /// s(c, a).
    pub similarity: f64,
    /// cos(φ_o, φ_s).
    pub weight: f64,
    /// The ranking key at the time the member was picked.
    pub mmr_score: f64,
}

/// The selected compositions of one action, best first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionCompositionSet {
    pub action_id: usize,
    pub members: Vec<Member>,
    pub mode: SelectionMode,
}

impl ActionCompositionSet {
    pub fn compositions(&self) -> impl Iterator<Item = CompositionRef> + '_ {
        self.members.iter().map(|m| m.composition)
    }
}

/// One single-source label and its similarity to an action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabelScore {
    pub id: usize,
    pub similarity: f64,
}

fn relevance(space: &CompositionSpace, sim: f64, c: CompositionRef, weighted: bool) -> f64 {
    if weighted {
        sim * space.weight_unchecked(c)
    } else {
        sim
    }
}

/// The `n` most relevant compositions, best first, as `(composition,
/// relevance)`.
fn relevance_head(space: &CompositionSpace, action: &[f64], n: usize, weighted: bool) -> Result<Vec<Scored<CompositionRef>>> {
    if space.is_empty() {
        return Err(Error::Argument("composition space is empty".into()));
    }
    let mut top = TopK::new(n);
    space.score_all_compositions(action, |c, sim| top.push(relevance(space, sim, c, weighted), c))?;
    Ok(top.into_sorted_vec())
}

fn member(space: &CompositionSpace, profile: &ActionProfile, c: CompositionRef, score: f64) -> Member {
    Member {
        composition: c,
        similarity: space.profiled_similarity(profile, c).unwrap_or(0.0),
        weight: space.weight_unchecked(c),
        mmr_score: score,
    }
}

/// The `k` compositions with the highest s(c, a).
pub fn select_top_k_plain(
    space: &CompositionSpace,
    action_id: usize,
    action: &[f64],
    k: usize,
) -> Result<ActionCompositionSet> {
    select_plain(space, action_id, action, k, false)
}

fn select_plain(
    space: &CompositionSpace,
    action_id: usize,
    action: &[f64],
    k: usize,
    weighted: bool,
) -> Result<ActionCompositionSet> {
    if k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    let head = relevance_head(space, action, k, weighted)?;
    let profile = space.action_profile(action)?;
    Ok(ActionCompositionSet {
        action_id,
        members: head
            .into_iter()
            .map(|s| member(space, &profile, s.id, s.score))
            .collect(),
        mode: SelectionMode::Plain,
    })
}

/// Greedy MMR over the relevance head: seed with the most relevant
/// composition, then repeatedly add the candidate maximizing
/// `λ·s(c′, a) − (1 − λ)·max_{c″ selected} s(c′, c″)`.
///
/// Runs with the same explicit pool size are prefix-consistent in `k`.
pub fn select_top_k_mmr(
    space: &CompositionSpace,
    action_id: usize,
    action: &[f64],
    config: &SelectionConfig,
) -> Result<ActionCompositionSet> {
    config.validate()?;
    let pool_n = match config.pool() {
        PoolSize::Full => space.len(),
        PoolSize::Limited(n) => n.min(space.len()),
    };
    let head = relevance_head(space, action, pool_n, config.weighted)?;
    let profile = space.action_profile(action)?;
    let mut pool = CandidatePool::new(space, &head);
    let picks = pool.run(config.k, config.lambda);
    Ok(ActionCompositionSet {
        action_id,
        members: picks
            .into_iter()
            .map(|(i, score)| member(space, &profile, head[i].id, score))
            .collect(),
        mode: SelectionMode::Mmr {
            lambda: config.lambda,
            pool_size: pool_n,
        },
    })
}

/// Plain or MMR selection depending on `diversify`.
pub fn select_compositions(
    space: &CompositionSpace,
    action_id: usize,
    action: &[f64],
    config: &SelectionConfig,
    diversify: bool,
) -> Result<ActionCompositionSet> {
    config.validate()?;
    if diversify {
        select_top_k_mmr(space, action_id, action, config)
    } else {
        select_plain(space, action_id, action, config.k, config.weighted)
    }
}

/// Struct-of-arrays view of the MMR candidates with member ids compacted
/// to the distinct objects and scenes that occur in the pool.
struct CandidatePool<'a> {
    space: &'a CompositionSpace,
    relevance: Vec<f64>,
    refs: Vec<CompositionRef>,
    pair_norm: Vec<f64>,
    object_slot: Vec<u32>,
    scene_slot: Vec<u32>,
    objects: Vec<usize>,
    scenes: Vec<usize>,
    max_sim: Vec<f64>,
    selected: Vec<bool>,
    object_dots: HashMap<usize, Vec<f64>>,
    scene_dots: HashMap<usize, Vec<f64>>,
}

impl<'a> CandidatePool<'a> {
    fn new(space: &'a CompositionSpace, head: &[Scored<CompositionRef>]) -> Self {
        let mut object_map = vec![u32::MAX; space.num_objects()];
        let mut scene_map = vec![u32::MAX; space.num_scenes()];
        let mut objects = Vec::new();
        let mut scenes = Vec::new();
        let mut object_slot = Vec::with_capacity(head.len());
        let mut scene_slot = Vec::with_capacity(head.len());
        for s in head {
            let c = s.id;
            if object_map[c.object] == u32::MAX {
                object_map[c.object] = objects.len() as u32;
                objects.push(c.object);
            }
            if scene_map[c.scene] == u32::MAX {
                scene_map[c.scene] = scenes.len() as u32;
                scenes.push(c.scene);
            }
            object_slot.push(object_map[c.object]);
            scene_slot.push(scene_map[c.scene]);
        }
        Self {
            space,
            relevance: head.iter().map(|s| s.score).collect(),
            refs: head.iter().map(|s| s.id).collect(),
            pair_norm: head.iter().map(|s| space.pair_norm(s.id)).collect(),
            object_slot,
            scene_slot,
            objects,
            scenes,
            max_sim: vec![f64::NEG_INFINITY; head.len()],
            selected: vec![false; head.len()],
            object_dots: HashMap::new(),
            scene_dots: HashMap::new(),
        }
    }

    /// Returns `(pool index, mmr score)` in pick order.
    fn run(&mut self, k: usize, lambda: f64) -> Vec<(usize, f64)> {
        let k = k.min(self.refs.len());
        let mut picks = Vec::with_capacity(k);
        if k == 0 {
            return picks;
        }
        // the head is sorted, so the seed is its first entry
        picks.push((0, lambda * self.relevance[0]));
        self.select(0);
        while picks.len() < k {
            let mut best: Option<(Scored<CompositionRef>, usize)> = None;
            for i in 0..self.refs.len() {
                if self.selected[i] {
                    continue;
                }
                let score = lambda * self.relevance[i] - (1.0 - lambda) * self.max_sim[i];
                let cand = Scored::new(score, self.refs[i]);
                if best.as_ref().is_none_or(|(b, _)| cand > *b) {
                    best = Some((cand, i));
                }
            }
            let (score, i) = best.expect("pool has unselected candidates");
            picks.push((i, score.score));
            self.select(i);
        }
        picks
    }

    /// Marks pool entry `i` selected and folds its similarity to every other
    /// candidate into the running maxima.
    fn select(&mut self, i: usize) {
        self.selected[i] = true;
        let new = self.refs[i];
        let space = self.space;
        let new_norm = self.pair_norm[i];

        let objects = &self.objects;
        let scenes = &self.scenes;
        let oo = self.object_dots.entry(new.object).or_insert_with(|| {
            let v = space.objects().vector(new.object);
            objects.iter().map(|&o| dot(space.objects().vector(o), v)).collect()
        });
        let ss = self.scene_dots.entry(new.scene).or_insert_with(|| {
            let v = space.scenes().vector(new.scene);
            scenes.iter().map(|&s| dot(space.scenes().vector(s), v)).collect()
        });
        let cross_to_new_scene: Vec<f64> = objects.iter().map(|&o| space.cross_dot(o, new.scene)).collect();
        let cross_from_new_object: Vec<f64> = scenes.iter().map(|&s| space.cross_dot(new.object, s)).collect();

        for j in 0..self.refs.len() {
            if self.selected[j] {
                continue;
            }
            let os = self.object_slot[j] as usize;
            let sc = self.scene_slot[j] as usize;
            let denom = self.pair_norm[j] * new_norm;
            let sim = if denom == 0.0 {
                0.0
            } else {
                let num = oo[os] + cross_to_new_scene[os] + cross_from_new_object[sc] + ss[sc];
                (num / denom).clamp(-1.0, 1.0)
            };
            if sim > self.max_sim[j] {
                self.max_sim[j] = sim;
            }
        }
    }
}

fn label_similarities(table: &EmbeddingTable, action: &[f64]) -> Result<Vec<f64>> {
    if action.len() != table.dim() {
        return Err(Error::Schema(format!(
            "action vector has {} components, table has {}",
            action.len(),
            table.dim()
        )));
    }
    let a_norm = norm(action);
    Ok(table
        .iter()
        .enumerate()
        .map(|(id, v)| {
            let denom = table.norm(id) * a_norm;
            if denom == 0.0 {
                0.0
            } else {
                (dot(v, action) / denom).clamp(-1.0, 1.0)
            }
        })
        .collect())
}

fn top_labels(sims: impl IntoIterator<Item = f64>, k: usize) -> Vec<LabelScore> {
    let mut top = TopK::new(k);
    for (id, s) in sims.into_iter().enumerate() {
        top.push(s, id);
    }
    top.into_sorted_vec()
        .into_iter()
        .map(|s| LabelScore {
            id: s.id,
            similarity: s.score,
        })
        .collect()
}

/// The `k` labels of one source most similar to the action.
pub fn select_top_k_single(table: &EmbeddingTable, action: &[f64], k: usize) -> Result<Vec<LabelScore>> {
    if k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    if table.is_empty() {
        return Err(Error::Argument("vocabulary is empty".into()));
    }
    Ok(top_labels(label_similarities(table, action)?, k))
}

/// Top-k over objects followed by scenes; scene ids are offset by `|O|`.
pub fn select_top_k_union(
    objects: &EmbeddingTable,
    scenes: &EmbeddingTable,
    action: &[f64],
    k: usize,
) -> Result<Vec<LabelScore>> {
    if k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    if objects.is_empty() && scenes.is_empty() {
        return Err(Error::Argument("vocabulary is empty".into()));
    }
    let mut sims = label_similarities(objects, action)?;
    sims.extend(label_similarities(scenes, action)?);
    Ok(top_labels(sims, k))
}

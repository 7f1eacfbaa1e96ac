//! A slow, direct reference implementation for cross-checking the engine.
//!
//! Composition vectors are materialized, every ranking is a full sort, MMR
//! recomputes pair cosines from the materialized vectors, and scores are
//! plain sums. Nothing here calls the engine's numeric kernels; only the
//! embedding tables and probability matrices are shared.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::composition::SpaceOptions;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::inference::{Evidence, Method};
use crate::pipeline::{Engine, EngineParams};
use crate::probability::ProbabilityMatrix;
use crate::selection::PoolSize;

/// Largest |O|·|S| the oracle will materialize.
pub const MAX_COMPOSITIONS: usize = 100_000;

/// Vectors whose squared norm falls below this fraction of the summed
/// squared member norms count as cancelled.
const CANCELLED: f64 = 1e-12;

pub fn naive_dot(u: &[f64], v: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..u.len() {
        total += u[i] * v[i];
    }
    total
}

pub fn naive_cosine(u: &[f64], v: &[f64]) -> f64 {
    let nu = naive_dot(u, u).sqrt();
    let nv = naive_dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (naive_dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = naive_dot(v, v).sqrt();
    if n == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub params: EngineParams,
    pub space: SpaceOptions,
}

impl OracleConfig {
    pub fn new(params: EngineParams, space: SpaceOptions) -> Self {
        Self { params, space }
    }
}

/// One materialized composition.
#[derive(Debug, Clone)]
struct Comp {
    object: usize,
    scene: usize,
    vector: Vec<f64>,
    /// False when the summed vector cancelled out.
    live: bool,
    weight: f64,
}

/// Every composition of the two tables, materialized.
#[derive(Debug, Clone)]
pub struct MaterializedSpace {
    comps: Vec<Comp>,
}

impl MaterializedSpace {
    pub fn new(objects: &EmbeddingTable, scenes: &EmbeddingTable, options: SpaceOptions) -> Result<Self> {
        let total = objects.len().saturating_mul(scenes.len());
        if total > MAX_COMPOSITIONS {
            return Err(Error::TooLarge {
                compositions: total,
                limit: MAX_COMPOSITIONS,
            });
        }
        let prep = |t: &EmbeddingTable, i: usize| {
            if options.normalize_before_sum {
                unit(t.vector(i))
            } else {
                t.vector(i).to_vec()
            }
        };
        let mut comps = Vec::with_capacity(total);
        for o in 0..objects.len() {
            let ov = prep(objects, o);
            for s in 0..scenes.len() {
                if options.exclude_self_pairs && objects.vocab().label(o) == scenes.vocab().label(s) {
                    continue;
                }
                let sv = prep(scenes, s);
                let vector: Vec<f64> = ov.iter().zip(&sv).map(|(a, b)| a + b).collect();
                let members = naive_dot(&ov, &ov) + naive_dot(&sv, &sv);
                let live = naive_dot(&vector, &vector) > CANCELLED * members;
                comps.push(Comp {
                    object: o,
                    scene: s,
                    vector,
                    live,
                    weight: naive_cosine(&ov, &sv),
                });
            }
        }
        Ok(Self { comps })
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    fn similarity(&self, i: usize, action: &[f64]) -> f64 {
        let c = &self.comps[i];
        if c.live {
            naive_cosine(&c.vector, action)
        } else {
            0.0
        }
    }

    fn pair_similarity(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.comps[i], &self.comps[j]);
        if !a.live || !b.live {
            return 0.0;
        }
        if i == j {
            return 1.0;
        }
        naive_cosine(&a.vector, &b.vector)
    }
}

/// One selected item: `(object, scene)` for compositions, a label id for
/// single sources, with its similarity to the action and its weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleMember {
    pub id: (usize, usize),
    pub similarity: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub method: Method,
    pub action_ids: Vec<usize>,
    /// Per action; late fusion lists the object picks then the scene picks.
    pub sets: Vec<Vec<OracleMember>>,
    pub video_ids: Vec<String>,
    /// `scores[v][a]`.
    pub scores: Vec<Vec<f64>>,
    pub predictions: Vec<usize>,
}

/// Descending by key, then ascending by id.
fn full_sort<T: Ord + Copy>(items: &mut [(f64, T)]) {
    items.sort_by(|a, b| (b.0 + 0.0).total_cmp(&(a.0 + 0.0)).then(a.1.cmp(&b.1)));
}

fn oracle_plain(space: &MaterializedSpace, action: &[f64], k: usize, weighted: bool) -> Vec<usize> {
    let mut ranked: Vec<(f64, (usize, usize, usize))> = (0..space.len())
        .map(|i| {
            let c = &space.comps[i];
            let s = space.similarity(i, action);
            (if weighted { s * c.weight } else { s }, (c.object, c.scene, i))
        })
        .collect();
    full_sort(&mut ranked);
    ranked.into_iter().take(k).map(|(_, (_, _, i))| i).collect()
}

fn oracle_mmr(space: &MaterializedSpace, action: &[f64], k: usize, lambda: f64, pool: PoolSize, weighted: bool) -> Vec<usize> {
    let pool_n = match pool {
        PoolSize::Full => space.len(),
        PoolSize::Limited(n) => n.min(space.len()),
    };
    let candidates = oracle_plain(space, action, pool_n, weighted);
    let relevance: Vec<f64> = candidates
        .iter()
        .map(|&i| {
            let s = space.similarity(i, action);
            if weighted {
                s * space.comps[i].weight
            } else {
                s
            }
        })
        .collect();
    let mut chosen: Vec<usize> = Vec::new();
    let mut taken = vec![false; candidates.len()];
    while chosen.len() < k.min(candidates.len()) {
        let mut best: Option<(f64, usize)> = None;
        for (p, &i) in candidates.iter().enumerate() {
            if taken[p] {
                continue;
            }
            let score = if chosen.is_empty() {
                relevance[p]
            } else {
                let redundancy = chosen
                    .iter()
                    .map(|&q| space.pair_similarity(i, candidates[q]))
                    .fold(f64::NEG_INFINITY, f64::max);
                lambda * relevance[p] - (1.0 - lambda) * redundancy
            } + 0.0;
            let key = |q: usize| (space.comps[candidates[q]].object, space.comps[candidates[q]].scene);
            let better = match best {
                None => true,
                Some((bs, bp)) => score > bs || (score == bs && key(p) < key(bp)),
            };
            if better {
                best = Some((score, p));
            }
        }
        let (_, p) = best.expect("an untaken candidate remains");
        taken[p] = true;
        chosen.push(p);
    }
    chosen.into_iter().map(|p| candidates[p]).collect()
}

fn oracle_single(table: &EmbeddingTable, action: &[f64], offset: usize) -> Vec<(f64, usize)> {
    (0..table.len())
        .map(|i| (naive_cosine(table.vector(i), action), i + offset))
        .collect()
}

fn top_labels(mut all: Vec<(f64, usize)>, k: usize) -> Vec<OracleMember> {
    full_sort(&mut all);
    all.into_iter()
        .take(k)
        .map(|(s, id)| OracleMember {
            id: (id, 0),
            similarity: s,
            weight: 1.0,
        })
        .collect()
}

fn need<'a, T>(x: Option<&'a T>, what: &str) -> Result<&'a T> {
    x.ok_or_else(|| Error::Argument(format!("the oracle needs {what}")))
}

fn clip(s: f64, on: bool) -> f64 {
    if on {
        s.max(0.0)
    } else {
        s
    }
}

fn single_score(row: &[f64], set: &[OracleMember], on: bool) -> f64 {
    set.iter().map(|m| clip(m.similarity, on) * row[m.id.0]).sum()
}

/// Runs `method` end to end on every action and every video.
pub fn oracle_pipeline(
    actions: &EmbeddingTable,
    objects: Option<&EmbeddingTable>,
    scenes: Option<&EmbeddingTable>,
    evidence: &Evidence<'_>,
    method: Method,
    config: &OracleConfig,
) -> Result<OracleResult> {
    let p = &config.params;
    let action_ids: Vec<usize> = (0..actions.len()).collect();
    let mut sets = Vec::with_capacity(actions.len());
    let n_objects = objects.map_or(0, |t| t.len());

    if method.uses_compositions() {
        let space = MaterializedSpace::new(need(objects, "object embeddings")?, need(scenes, "scene embeddings")?, config.space)?;
        let weighted = method == Method::CompositionsWeightedSelection;
        for a in 0..actions.len() {
            let v = actions.vector(a);
            let picks = if p.diversify {
                let pool = p.pool_size.unwrap_or_else(|| PoolSize::default_for(p.k_compositions));
                oracle_mmr(&space, v, p.k_compositions, p.lambda, pool, weighted)
            } else {
                oracle_plain(&space, v, p.k_compositions, weighted)
            };
            sets.push(
                picks
                    .into_iter()
                    .map(|i| OracleMember {
                        id: (space.comps[i].object, space.comps[i].scene),
                        similarity: space.similarity(i, v),
                        weight: space.comps[i].weight,
                    })
                    .collect::<Vec<_>>(),
            );
        }
    } else {
        for a in 0..actions.len() {
            let v = actions.vector(a);
            let set = match method {
                Method::ObjectOnly => top_labels(oracle_single(need(objects, "object embeddings")?, v, 0), p.k_objects),
                Method::SceneOnly => top_labels(oracle_single(need(scenes, "scene embeddings")?, v, 0), p.k_scenes),
                Method::Concatenation => {
                    let mut all = oracle_single(need(objects, "object embeddings")?, v, 0);
                    all.extend(oracle_single(need(scenes, "scene embeddings")?, v, n_objects));
                    top_labels(all, p.k_concatenation)
                }
                Method::LateFusion => {
                    let mut both = top_labels(oracle_single(need(objects, "object embeddings")?, v, 0), p.k_objects);
                    let scene_part = top_labels(oracle_single(need(scenes, "scene embeddings")?, v, 0), p.k_scenes);
                    both.extend(scene_part);
                    both
                }
                _ => unreachable!("composition methods handled above"),
            };
            sets.push(set);
        }
    }

    let po: Option<&ProbabilityMatrix> = evidence.objects;
    let ps: Option<&ProbabilityMatrix> = evidence.scenes;
    let video_ids: Vec<String> = match (method.needs_objects(), method.needs_scenes()) {
        (true, _) => need(po, "object probabilities")?.video_ids().to_vec(),
        (false, _) => need(ps, "scene probabilities")?.video_ids().to_vec(),
    };
    let k_objects_picked = |set: &[OracleMember]| set.len().min(p.k_objects).min(n_objects);
    let mut scores = Vec::with_capacity(video_ids.len());
    for v in 0..video_ids.len() {
        let orow = po.map(|m| m.row(v));
        let srow = ps.map(|m| m.row(v));
        let row: Vec<f64> = sets
            .iter()
            .map(|set| match method {
                Method::Compositions | Method::CompositionsWeightedSelection => set
                    .iter()
                    .map(|m| clip(m.similarity, p.clip_similarities) * orow.unwrap()[m.id.0] * srow.unwrap()[m.id.1])
                    .sum(),
                Method::CompositionsWeightedScoring => set
                    .iter()
                    .map(|m| {
                        clip(m.similarity, p.clip_similarities) * orow.unwrap()[m.id.0] * srow.unwrap()[m.id.1] * m.weight
                    })
                    .sum(),
                Method::ObjectOnly => single_score(orow.unwrap(), set, p.clip_similarities),
                Method::SceneOnly => single_score(srow.unwrap(), set, p.clip_similarities),
                Method::Concatenation => {
                    let joined: Vec<f64> = orow.unwrap().iter().chain(srow.unwrap()).copied().collect();
                    single_score(&joined, set, p.clip_similarities)
                }
                Method::LateFusion => {
                    let split = k_objects_picked(set);
                    let object_score = single_score(orow.unwrap(), &set[..split], p.clip_similarities);
                    let scene_score = single_score(srow.unwrap(), &set[split..], p.clip_similarities);
                    (object_score + scene_score) / 2.0
                }
            })
            .collect();
        scores.push(row);
    }
    let predictions = scores
        .iter()
        .map(|row| {
            let mut best = 0;
            for a in 1..row.len() {
                if row[a] > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect();
    Ok(OracleResult {
        method,
        action_ids,
        sets,
        video_ids,
        scores,
        predictions,
    })
}

/// Whether two scores agree to `tol` relative to the larger magnitude.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()) + 1e-12
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub methods: Vec<Method>,
    pub set_checks: usize,
    pub score_checks: usize,
    pub prediction_checks: usize,
    pub max_relative_error: f64,
    pub mismatches: Vec<String>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn merge(&mut self, other: EquivalenceReport) {
        for m in other.methods {
            if !self.methods.contains(&m) {
                self.methods.push(m);
            }
        }
        self.set_checks += other.set_checks;
        self.score_checks += other.score_checks;
        self.prediction_checks += other.prediction_checks;
        self.max_relative_error = self.max_relative_error.max(other.max_relative_error);
        self.mismatches.extend(other.mismatches);
    }
}

fn engine_sets(engine: &Engine, method: Method, action_ids: &[usize]) -> Result<Vec<BTreeSet<(usize, usize)>>> {
    use crate::inference::MethodSupport;
    Ok(match engine.support(method, action_ids)? {
        MethodSupport::Compositions { sets, .. } => sets
            .iter()
            .map(|s| s.compositions().map(|c| (c.object, c.scene)).collect())
            .collect(),
        MethodSupport::Objects(l) | MethodSupport::Scenes(l) | MethodSupport::Concatenation(l) => l
            .iter()
            .map(|s| s.members.iter().map(|m| (m.id, 0)).collect())
            .collect(),
        MethodSupport::LateFusion { objects, scenes } => objects
            .iter()
            .zip(&scenes)
            .map(|(o, s)| {
                o.members
                    .iter()
                    .map(|m| (m.id, 0))
                    .chain(s.members.iter().map(|m| (m.id, 1)))
                    .collect()
            })
            .collect(),
    })
}

/// Runs the engine and the oracle on every method in `methods` and lists
/// every disagreement in selected sets, scores (to `tol`, relative) and
/// predictions.
pub fn check_against_engine(
    engine: &Engine,
    evidence: &Evidence<'_>,
    methods: &[Method],
    space: SpaceOptions,
    tol: f64,
) -> Result<EquivalenceReport> {
    let config = OracleConfig::new(*engine.params(), space);
    let mut report = EquivalenceReport {
        methods: methods.to_vec(),
        ..Default::default()
    };
    let all: Vec<usize> = (0..engine.actions().len()).collect();
    for &method in methods {
        let oracle = oracle_pipeline(engine.actions(), engine.objects(), engine.scenes(), evidence, method, &config)?;
        let ours = engine.classify(method, evidence, Some(&all))?;

        let ours_sets = engine_sets(engine, method, &all)?;
        for (a, (mine, theirs)) in ours_sets.iter().zip(&oracle.sets).enumerate() {
            let theirs: BTreeSet<(usize, usize)> = if method == Method::LateFusion {
                let split = engine.params().k_objects.min(engine.objects().map_or(0, |t| t.len()));
                theirs
                    .iter()
                    .enumerate()
                    .map(|(i, m)| (m.id.0, usize::from(i >= split)))
                    .collect()
            } else {
                theirs.iter().map(|m| m.id).collect()
            };
            report.set_checks += 1;
            if *mine != theirs {
                report
                    .mismatches
                    .push(format!("{method}: action {a} selects a different set"));
            }
        }

        if ours.scores.video_ids != oracle.video_ids {
            report.mismatches.push(format!("{method}: video order differs"));
            continue;
        }
        for (v, row) in oracle.scores.iter().enumerate() {
            for (a, &expect) in row.iter().enumerate() {
                let got = ours.scores.get(v, a);
                report.score_checks += 1;
                let scale = got.abs().max(expect.abs());
                if scale > 0.0 {
                    report.max_relative_error = report.max_relative_error.max((got - expect).abs() / scale);
                }
                if !close(got, expect, tol) {
                    report.mismatches.push(format!(
                        "{method}: score of video {:?} for action {a} is {got}, oracle {expect}",
                        oracle.video_ids[v]
                    ));
                }
            }
            report.prediction_checks += 1;
            if ours.predictions[v].action_id != oracle.predictions[v] {
                report.mismatches.push(format!(
                    "{method}: video {:?} predicted {} but oracle predicted {}",
                    oracle.video_ids[v], ours.predictions[v].action_id, oracle.predictions[v]
                ));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{SourceKind, Vocabulary};

    fn table(kind: SourceKind, labels: &[&str], vectors: Vec<Vec<f64>>) -> EmbeddingTable {
        EmbeddingTable::from_vectors(Vocabulary::new(kind, labels.iter().copied()).unwrap(), vectors).unwrap()
    }

    #[test]
    fn hand_computed_two_by_two() {
        let objects = table(SourceKind::Objects, &["o0", "o1"], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let scenes = table(SourceKind::Scenes, &["s0", "s1"], vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
        let space = MaterializedSpace::new(&objects, &scenes, SpaceOptions::default()).unwrap();
        let a = [1.0, 0.0];
        // (0,0) = (2,0); (0,1) = (1,2); (1,0) = (1,1); (1,1) = (0,3)
        let expect = [1.0, 1.0 / 5f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0];
        for (i, e) in expect.iter().enumerate() {
            assert!((space.similarity(i, &a) - e).abs() < 1e-15);
        }
        assert_eq!(oracle_plain(&space, &a, 2, false), [0, 2]);
        // (2,0)·(1,2) / (2·√5)
        assert!((space.pair_similarity(0, 1) - 1.0 / 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lambda_one_equals_plain() {
        let objects = table(
            SourceKind::Objects,
            &["a", "b", "c"],
            vec![vec![0.3, -1.0, 0.2], vec![1.0, 0.5, 0.0], vec![-0.4, 0.1, 0.9]],
        );
        let scenes = table(SourceKind::Scenes, &["x", "y"], vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.2, -0.3]]);
        let space = MaterializedSpace::new(&objects, &scenes, SpaceOptions::default()).unwrap();
        let a = [0.5, 0.5, -0.1];
        for k in 1..=6 {
            let mut m = oracle_mmr(&space, &a, k, 1.0, PoolSize::Full, false);
            let mut p = oracle_plain(&space, &a, k, false);
            m.sort();
            p.sort();
            assert_eq!(m, p);
        }
    }

    #[test]
    fn size_guard() {
        let objects = table(
            SourceKind::Objects,
            &(0..400).map(|i| format!("o{i}")).collect::<Vec<_>>().iter().map(String::as_str).collect::<Vec<_>>(),
            vec![vec![1.0]; 400],
        );
        let scenes = table(
            SourceKind::Scenes,
            &(0..300).map(|i| format!("s{i}")).collect::<Vec<_>>().iter().map(String::as_str).collect::<Vec<_>>(),
            vec![vec![1.0]; 300],
        );
        assert!(matches!(
            MaterializedSpace::new(&objects, &scenes, SpaceOptions::default()),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn self_pairs_are_dropped_by_label() {
        let objects = table(SourceKind::Objects, &["dog", "cat"], vec![vec![1.0], vec![2.0]]);
        let scenes = table(SourceKind::Scenes, &["cat", "park"], vec![vec![1.0], vec![3.0]]);
        let opts = SpaceOptions {
            exclude_self_pairs: true,
            ..Default::default()
        };
        assert_eq!(MaterializedSpace::new(&objects, &scenes, opts).unwrap().len(), 3);
    }
}

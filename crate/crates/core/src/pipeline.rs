//! Selection and scoring for a whole action vocabulary under one method.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::composition::{CompositionSpace, SpaceOptions};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::inference::{classify_batch, Classification, Evidence, LabelSet, Method, MethodSupport, WeightMode};
use crate::selection::{
    select_compositions, select_top_k_single, select_top_k_union, ActionCompositionSet, PoolSize, SelectionConfig,
    DEFAULT_K_COMPOSITIONS, DEFAULT_K_CONCATENATION, DEFAULT_K_OBJECTS, DEFAULT_K_SCENES, DEFAULT_LAMBDA,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub k_objects: usize,
    pub k_scenes: usize,
    pub k_concatenation: usize,
    pub k_compositions: usize,
    pub lambda: f64,
    /// MMR when set, plain top-k otherwise.
    pub diversify: bool,
    pub pool_size: Option<PoolSize>,
    pub clip_similarities: bool,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            k_objects: DEFAULT_K_OBJECTS,
            k_scenes: DEFAULT_K_SCENES,
            k_concatenation: DEFAULT_K_CONCATENATION,
            k_compositions: DEFAULT_K_COMPOSITIONS,
            lambda: DEFAULT_LAMBDA,
            diversify: true,
            pool_size: None,
            clip_similarities: false,
        }
    }
}

impl EngineParams {
    pub fn selection_config(&self, weighted: bool) -> SelectionConfig {
        SelectionConfig {
            k: self.k_compositions,
            lambda: self.lambda,
            pool_size: self.pool_size,
            weighted,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, k) in [
            ("k_objects", self.k_objects),
            ("k_scenes", self.k_scenes),
            ("k_concatenation", self.k_concatenation),
        ] {
            if k == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        self.selection_config(false).validate().map_err(|e| match e {
            Error::Config { field, message } if field == "k" => Error::config("k_compositions", message),
            other => other,
        })
    }
}

/// Embedding tables, the composition space and the selection parameters.
#[derive(Debug)]
pub struct Engine {
    actions: EmbeddingTable,
    objects: Option<EmbeddingTable>,
    scenes: Option<EmbeddingTable>,
    space: Option<CompositionSpace>,
    params: EngineParams,
}

impl Engine {
    pub fn new(
        actions: EmbeddingTable,
        objects: Option<EmbeddingTable>,
        scenes: Option<EmbeddingTable>,
        params: EngineParams,
    ) -> Result<Self> {
        params.validate()?;
        for table in objects.iter().chain(scenes.iter()) {
            if table.dim() != actions.dim() {
                return Err(Error::Schema(format!(
                    "{} embeddings have dimension {}, actions have {}",
                    table.vocab().kind(),
                    table.dim(),
                    actions.dim()
                )));
            }
        }
        Ok(Self {
            actions,
            objects,
            scenes,
            space: None,
            params,
        })
    }

    /// Builds the composition space, reading its caches from `cache` when
    /// that file exists and writing them there otherwise.
    pub fn build_space(&mut self, options: SpaceOptions, cache: Option<&Path>) -> Result<&CompositionSpace> {
        let (Some(objects), Some(scenes)) = (&self.objects, &self.scenes) else {
            return Err(Error::Argument("compositions need both object and scene embeddings".into()));
        };
        let space = match cache {
            Some(path) if path.exists() => CompositionSpace::with_cache_file(objects.clone(), scenes.clone(), options, path)?,
            Some(path) => {
                let space = CompositionSpace::new(objects.clone(), scenes.clone(), options)?;
                space.save_cache(path)?;
                space
            }
            None => CompositionSpace::new(objects.clone(), scenes.clone(), options)?,
        };
        Ok(self.space.insert(space))
    }

    pub fn actions(&self) -> &EmbeddingTable {
        &self.actions
    }

    pub fn objects(&self) -> Option<&EmbeddingTable> {
        self.objects.as_ref()
    }

    pub fn scenes(&self) -> Option<&EmbeddingTable> {
        self.scenes.as_ref()
    }

    pub fn space(&self) -> Option<&CompositionSpace> {
        self.space.as_ref()
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    fn check_actions(&self, action_ids: &[usize]) -> Result<()> {
        match action_ids.iter().find(|&&a| a >= self.actions.len()) {
            Some(a) => Err(Error::Argument(format!(
                "action id {a} is outside a vocabulary of {}",
                self.actions.len()
            ))),
            None => Ok(()),
        }
    }

    /// Selected compositions for each action, in the order given.
    pub fn composition_sets(&self, action_ids: &[usize], weighted_selection: bool) -> Result<Vec<ActionCompositionSet>> {
        self.check_actions(action_ids)?;
        let space = self
            .space
            .as_ref()
            .ok_or_else(|| Error::Argument("composition space has not been built".into()))?;
        let config = self.params.selection_config(weighted_selection);
        action_ids
            .par_iter()
            .map(|&a| select_compositions(space, a, self.actions.vector(a), &config, self.params.diversify))
            .collect()
    }

    fn label_sets<F>(&self, action_ids: &[usize], select: F) -> Result<Vec<LabelSet>>
    where
        F: Fn(&[f64]) -> Result<Vec<crate::selection::LabelScore>> + Sync,
    {
        self.check_actions(action_ids)?;
        action_ids
            .par_iter()
            .map(|&a| {
                Ok(LabelSet {
                    action_id: a,
                    members: select(self.actions.vector(a))?,
                })
            })
            .collect()
    }

    fn source<'a>(table: &'a Option<EmbeddingTable>, what: &str) -> Result<&'a EmbeddingTable> {
        table
            .as_ref()
            .ok_or_else(|| Error::Argument(format!("{what} embeddings are required for this method")))
    }

    /// What `method` needs per action to score videos.
    pub fn support(&self, method: Method, action_ids: &[usize]) -> Result<MethodSupport> {
        let p = &self.params;
        Ok(match method {
            Method::Compositions => MethodSupport::Compositions {
                sets: self.composition_sets(action_ids, false)?,
                weight_mode: WeightMode::None,
            },
            Method::CompositionsWeightedScoring => MethodSupport::Compositions {
                sets: self.composition_sets(action_ids, false)?,
                weight_mode: WeightMode::InScoring,
            },
            Method::CompositionsWeightedSelection => MethodSupport::Compositions {
                sets: self.composition_sets(action_ids, true)?,
                weight_mode: WeightMode::None,
            },
            Method::ObjectOnly => {
                let objects = Self::source(&self.objects, "object")?;
                MethodSupport::Objects(self.label_sets(action_ids, |a| select_top_k_single(objects, a, p.k_objects))?)
            }
            Method::SceneOnly => {
                let scenes = Self::source(&self.scenes, "scene")?;
                MethodSupport::Scenes(self.label_sets(action_ids, |a| select_top_k_single(scenes, a, p.k_scenes))?)
            }
            Method::Concatenation => {
                let objects = Self::source(&self.objects, "object")?;
                let scenes = Self::source(&self.scenes, "scene")?;
                MethodSupport::Concatenation(
                    self.label_sets(action_ids, |a| select_top_k_union(objects, scenes, a, p.k_concatenation))?,
                )
            }
            Method::LateFusion => {
                let objects = Self::source(&self.objects, "object")?;
                let scenes = Self::source(&self.scenes, "scene")?;
                MethodSupport::LateFusion {
                    objects: self.label_sets(action_ids, |a| select_top_k_single(objects, a, p.k_objects))?,
                    scenes: self.label_sets(action_ids, |a| select_top_k_single(scenes, a, p.k_scenes))?,
                }
            }
        })
    }

    /// Scores every video against `action_ids` (all actions when `None`).
    pub fn classify(&self, method: Method, evidence: &Evidence<'_>, action_ids: Option<&[usize]>) -> Result<Classification> {
        let all: Vec<usize>;
        let ids = match action_ids {
            Some(ids) => ids,
            None => {
                all = (0..self.actions.len()).collect();
                &all
            }
        };
        let support = self.support(method, ids)?;
        classify_batch(evidence, &support, self.actions.vocab(), method, self.params.clip_similarities)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{SourceKind, Vocabulary};

    fn table(kind: SourceKind, prefix: &str, vectors: Vec<Vec<f64>>) -> EmbeddingTable {
        let vocab = Vocabulary::new(kind, (0..vectors.len()).map(|i| format!("{prefix}{i}"))).unwrap();
        EmbeddingTable::from_vectors(vocab, vectors).unwrap()
    }

    fn engine(params: EngineParams) -> Engine {
        let actions = table(SourceKind::Actions, "a", vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let objects = table(SourceKind::Objects, "o", vec![vec![1.0, 0.1], vec![0.1, 1.0]]);
        let scenes = table(SourceKind::Scenes, "s", vec![vec![0.9, 0.0], vec![0.0, 0.9], vec![0.5, 0.5]]);
        Engine::new(actions, Some(objects), Some(scenes), params).unwrap()
    }

    #[test]
    fn compositions_need_a_space() {
        let e = engine(EngineParams::default());
        assert!(e.support(Method::Compositions, &[0]).is_err());
        assert!(e.support(Method::ObjectOnly, &[0, 1]).is_ok());
    }

    #[test]
    fn method_matrix_classifies() {
        let params = EngineParams {
            k_compositions: 2,
            k_objects: 1,
            k_scenes: 1,
            k_concatenation: 2,
            ..EngineParams::default()
        };
        let mut e = engine(params);
        e.build_space(SpaceOptions::default(), None).unwrap();
        let ov = Vocabulary::new(SourceKind::Objects, ["o0", "o1"]).unwrap();
        let sv = Vocabulary::new(SourceKind::Scenes, ["s0", "s1", "s2"]).unwrap();
        let po = crate::probability::ProbabilityMatrix::new(&ov, vec!["v0".into(), "v1".into()], vec![0.9, 0.1, 0.1, 0.9], false).unwrap();
        let ps = crate::probability::ProbabilityMatrix::new(
            &sv,
            vec!["v0".into(), "v1".into()],
            vec![0.8, 0.1, 0.1, 0.1, 0.8, 0.1],
            false,
        )
        .unwrap();
        let ev = Evidence {
            objects: Some(&po),
            scenes: Some(&ps),
        };
        for m in Method::ALL {
            let out = e.classify(m, &ev, None).unwrap();
            let ids: Vec<usize> = out.predictions.iter().map(|p| p.action_id).collect();
            assert_eq!(ids, [0, 1], "{m}");
        }
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let actions = table(SourceKind::Actions, "a", vec![vec![1.0, 0.0, 0.0]]);
        let objects = table(SourceKind::Objects, "o", vec![vec![1.0, 0.0]]);
        assert!(matches!(
            Engine::new(actions, Some(objects), None, EngineParams::default()),
            Err(Error::Schema(_))
        ));
    }
}

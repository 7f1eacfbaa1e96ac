//! The JSON run configuration and loading of everything it points at.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::composition::SpaceOptions;
use crate::embeddings::{load_embedding_table, EmbeddingFormat, EmbeddingTable, OovPolicy};
use crate::error::{Error, Result};
use crate::evaluation::GroundTruth;
use crate::inference::{Evidence, Method};
use crate::pipeline::{Engine, EngineParams};
use crate::probability::{load_probability_matrix, MatrixFormat, ProbabilityMatrix};
use crate::selection::{
    PoolSize, DEFAULT_K_COMPOSITIONS, DEFAULT_K_CONCATENATION, DEFAULT_K_OBJECTS, DEFAULT_K_SCENES, DEFAULT_LAMBDA,
};
use crate::vocab::{SourceKind, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub action_vocab: Option<PathBuf>,
    pub object_vocab: Option<PathBuf>,
    pub scene_vocab: Option<PathBuf>,
    pub action_embeddings: Option<PathBuf>,
    pub object_embeddings: Option<PathBuf>,
    pub scene_embeddings: Option<PathBuf>,
    pub embedding_format: EmbeddingFormat,
    pub oov_policy: OovPolicy,
    pub object_probs: Option<PathBuf>,
    pub scene_probs: Option<PathBuf>,
    pub matrix_format: MatrixFormat,
    pub ground_truth: Option<PathBuf>,
    /// Method for `select` and `classify`.
    pub method: Method,
    /// Methods for `evaluate`, `ablate` and `oracle-check`.
    pub methods: Vec<Method>,
    pub k_objects: usize,
    pub k_scenes: usize,
    pub k_concatenation: usize,
    pub k_compositions: usize,
    pub lambda: f64,
    pub diversify: bool,
    pub pool_size: Option<PoolSize>,
    pub seed: u64,
    /// Actions per trial; every action when unset.
    pub subset_size: Option<usize>,
    pub num_trials: usize,
    /// Ablation rows run once per subset size.
    pub subset_sizes: Vec<usize>,
    /// The method compared against in per-action deltas.
    pub delta_baseline: Method,
    pub renormalize: bool,
    pub normalize_before_sum: bool,
    pub exclude_self_pairs: bool,
    pub clip_similarities: bool,
    /// File holding the composition pair caches; written when absent.
    pub pair_cache: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[serde(skip_serializing)]
    pub threads: usize,
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            action_vocab: None,
            object_vocab: None,
            scene_vocab: None,
            action_embeddings: None,
            object_embeddings: None,
            scene_embeddings: None,
            embedding_format: EmbeddingFormat::Word2vecText,
            oov_policy: OovPolicy::default(),
            object_probs: None,
            scene_probs: None,
            matrix_format: MatrixFormat::Csv,
            ground_truth: None,
            method: Method::Compositions,
            methods: Method::ALL.to_vec(),
            k_objects: DEFAULT_K_OBJECTS,
            k_scenes: DEFAULT_K_SCENES,
            k_concatenation: DEFAULT_K_CONCATENATION,
            k_compositions: DEFAULT_K_COMPOSITIONS,
            lambda: DEFAULT_LAMBDA,
            diversify: true,
            pool_size: None,
            seed: 0,
            subset_size: None,
            num_trials: 10,
            subset_sizes: Vec::new(),
            delta_baseline: Method::ObjectOnly,
            renormalize: false,
            normalize_before_sum: false,
            exclude_self_pairs: false,
            clip_similarities: false,
            pair_cache: None,
            threads: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.action_vocab,
            &mut self.object_vocab,
            &mut self.scene_vocab,
            &mut self.action_embeddings,
            &mut self.object_embeddings,
            &mut self.scene_embeddings,
            &mut self.object_probs,
            &mut self.scene_probs,
            &mut self.ground_truth,
            &mut self.pair_cache,
        ] {
            resolve(base, p);
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    pub fn engine_params(&self) -> EngineParams {
        EngineParams {
            k_objects: self.k_objects,
            k_scenes: self.k_scenes,
            k_concatenation: self.k_concatenation,
            k_compositions: self.k_compositions,
            lambda: self.lambda,
            diversify: self.diversify,
            pool_size: self.pool_size,
            clip_similarities: self.clip_similarities,
        }
    }

    pub fn space_options(&self) -> SpaceOptions {
        SpaceOptions {
            normalize_before_sum: self.normalize_before_sum,
            exclude_self_pairs: self.exclude_self_pairs,
        }
    }

    /// Checks numeric ranges and that every file `methods` will read exists.
    pub fn validate(&self, methods: &[Method], probabilities: bool, truth: bool) -> Result<()> {
        self.engine_params().validate()?;
        if self.num_trials == 0 {
            return Err(Error::config("num_trials", "must be at least 1"));
        }
        if self.subset_size == Some(0) || self.subset_sizes.contains(&0) {
            return Err(Error::config("subset_size", "must be at least 1"));
        }
        if methods.is_empty() {
            return Err(Error::config("methods", "list at least one method"));
        }
        let objects = methods.iter().any(|m| m.needs_objects());
        let scenes = methods.iter().any(|m| m.needs_scenes());
        let mut required: Vec<(&str, &Option<PathBuf>)> = vec![
            ("action_vocab", &self.action_vocab),
            ("action_embeddings", &self.action_embeddings),
        ];
        if objects {
            required.push(("object_vocab", &self.object_vocab));
            required.push(("object_embeddings", &self.object_embeddings));
            if probabilities {
                required.push(("object_probs", &self.object_probs));
            }
        }
        if scenes {
            required.push(("scene_vocab", &self.scene_vocab));
            required.push(("scene_embeddings", &self.scene_embeddings));
            if probabilities {
                required.push(("scene_probs", &self.scene_probs));
            }
        }
        if truth {
            required.push(("ground_truth", &self.ground_truth));
        }
        for (field, path) in required {
            match path {
                None => return Err(Error::config(field, "is required")),
                Some(p) if !p.exists() => {
                    return Err(Error::config(field, format!("{} does not exist", p.display())));
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// Everything a run reads from disk.
#[derive(Debug)]
pub struct Inputs {
    pub actions: EmbeddingTable,
    pub objects: Option<EmbeddingTable>,
    pub scenes: Option<EmbeddingTable>,
    pub object_probs: Option<ProbabilityMatrix>,
    pub scene_probs: Option<ProbabilityMatrix>,
    pub truth: Option<GroundTruth>,
}

fn required(p: &Option<PathBuf>, field: &str) -> Result<PathBuf> {
    p.clone().ok_or_else(|| Error::config(field, "is required"))
}

impl Inputs {
    /// Loads what `methods` need; probability matrices and ground truth
    /// only when asked for.
    pub fn load(cfg: &RunConfig, methods: &[Method], probabilities: bool, truth: bool) -> Result<Self> {
        cfg.validate(methods, probabilities, truth)?;
        let table = |vocab: &Option<PathBuf>, emb: &Option<PathBuf>, kind: SourceKind, vf: &str, ef: &str| -> Result<_> {
            let v = Vocabulary::load(required(vocab, vf)?, kind)?;
            let t = load_embedding_table(&required(emb, ef)?, cfg.embedding_format, v.clone(), cfg.oov_policy)?;
            Ok((v, t))
        };
        let (action_vocab, actions) = table(
            &cfg.action_vocab,
            &cfg.action_embeddings,
            SourceKind::Actions,
            "action_vocab",
            "action_embeddings",
        )?;
        let mut inputs = Inputs {
            actions,
            objects: None,
            scenes: None,
            object_probs: None,
            scene_probs: None,
            truth: None,
        };
        if methods.iter().any(|m| m.needs_objects()) {
            let (v, t) = table(
                &cfg.object_vocab,
                &cfg.object_embeddings,
                SourceKind::Objects,
                "object_vocab",
                "object_embeddings",
            )?;
            if probabilities {
                inputs.object_probs = Some(load_probability_matrix(
                    required(&cfg.object_probs, "object_probs")?,
                    cfg.matrix_format,
                    &v,
                    cfg.renormalize,
                )?);
            }
            inputs.objects = Some(t);
        }
        if methods.iter().any(|m| m.needs_scenes()) {
            let (v, t) = table(
                &cfg.scene_vocab,
                &cfg.scene_embeddings,
                SourceKind::Scenes,
                "scene_vocab",
                "scene_embeddings",
            )?;
            if probabilities {
                inputs.scene_probs = Some(load_probability_matrix(
                    required(&cfg.scene_probs, "scene_probs")?,
                    cfg.matrix_format,
                    &v,
                    cfg.renormalize,
                )?);
            }
            inputs.scenes = Some(t);
        }
        if truth {
            inputs.truth = Some(GroundTruth::load(&required(&cfg.ground_truth, "ground_truth")?, &action_vocab)?);
        }
        Ok(inputs)
    }

    pub fn evidence(&self) -> Evidence<'_> {
        Evidence {
            objects: self.object_probs.as_ref(),
            scenes: self.scene_probs.as_ref(),
        }
    }

    /// An engine over these tables, with the composition space built when
    /// any of `methods` uses it.
    pub fn engine(&self, cfg: &RunConfig, methods: &[Method]) -> Result<Engine> {
        let mut engine = Engine::new(
            self.actions.clone(),
            self.objects.clone(),
            self.scenes.clone(),
            cfg.engine_params(),
        )?;
        if methods.iter().any(|m| m.uses_compositions()) {
            engine.build_space(cfg.space_options(), cfg.pair_cache.as_deref())?;
        }
        Ok(engine)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_published_settings() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.lambda, 0.75);
        assert_eq!((cfg.k_objects, cfg.k_scenes, cfg.k_concatenation, cfg.k_compositions), (100, 5, 100, 250));
        assert_eq!(cfg.num_trials, 10);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"lamda": 0.5}"#).is_err());
    }

    #[test]
    fn bad_lambda_names_the_field() {
        let cfg = RunConfig {
            lambda: 1.5,
            ..Default::default()
        };
        match cfg.validate(&[Method::Compositions], false, false) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "lambda"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_paths_are_config_errors() {
        let cfg = RunConfig {
            action_vocab: Some("/nonexistent/actions.txt".into()),
            ..Default::default()
        };
        let err = cfg.validate(&[Method::ObjectOnly], false, false).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = RunConfig {
            object_probs: Some("p.csv".into()),
            ..Default::default()
        };
        cfg.resolve_paths(Path::new("/data/run"));
        assert_eq!(cfg.object_probs.unwrap(), Path::new("/data/run/p.csv"));
        assert_eq!(cfg.output_dir, Path::new("/data/run/out"));
    }
}

//! The `zscomp` command line: argument parsing and the six commands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Inputs, RunConfig};
use crate::error::{Error, Result};
use crate::evaluation::{accuracy, per_action_delta, run_subset_trials, TrialReport};
use crate::fixtures::{generate, FixtureSpec};
use crate::inference::{Method, MethodSupport, Prediction};
use crate::oracle::{check_against_engine, EquivalenceReport};
use crate::pipeline::Engine;

#[derive(Debug, Parser)]
#[command(name = "zscomp", version, about = "Zero-shot action recognition from object-scene compositions")]
pub struct Cli {
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, env = "ZSCOMP_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select the compositions (or labels) of every action.
    Select(Overrides),
    /// Score and classify every video.
    Classify(Overrides),
    /// Accuracy, subset trials and per-action deltas.
    Evaluate(Overrides),
    /// Every method at every subset size, as one table.
    Ablate(Overrides),
    /// Write a planted synthetic instance and its config.
    Fixtures(FixtureArgs),
    /// Compare the engine with the reference implementation.
    OracleCheck(Overrides),
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// `OxSxA` or `OxSxAxV`.
    #[arg(long, default_value = "20x15x10x50")]
    pub size: String,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output_dir: PathBuf,
}

/// Every config field as an optional flag; set flags win over the file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub action_vocab: Option<PathBuf>,
    #[arg(long)]
    pub object_vocab: Option<PathBuf>,
    #[arg(long)]
    pub scene_vocab: Option<PathBuf>,
    #[arg(long)]
    pub action_embeddings: Option<PathBuf>,
    #[arg(long)]
    pub object_embeddings: Option<PathBuf>,
    #[arg(long)]
    pub scene_embeddings: Option<PathBuf>,
    #[arg(long)]
    pub object_probs: Option<PathBuf>,
    #[arg(long)]
    pub scene_probs: Option<PathBuf>,
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub pair_cache: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<String>,
    /// Comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub k_objects: Option<usize>,
    #[arg(long)]
    pub k_scenes: Option<usize>,
    #[arg(long)]
    pub k_concatenation: Option<usize>,
    #[arg(long)]
    pub k_compositions: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// A count or `full`.
    #[arg(long)]
    pub pool_size: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub subset_size: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub subset_sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub num_trials: Option<usize>,
    #[arg(long)]
    pub delta_baseline: Option<String>,
    /// Plain top-k instead of MMR.
    #[arg(long)]
    pub no_diversify: bool,
    #[arg(long)]
    pub renormalize: bool,
    #[arg(long)]
    pub normalize_before_sum: bool,
    #[arg(long)]
    pub exclude_self_pairs: bool,
    #[arg(long)]
    pub clip_similarities: bool,
}

impl Overrides {
    /// The config file (if any) with every set flag applied on top.
    pub fn resolve(&self, threads: Option<usize>) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => {
                let mut cfg = RunConfig::default();
                cfg.resolve_paths(Path::new("."));
                cfg
            }
        };
        let paths = [
            (&self.action_vocab, &mut cfg.action_vocab),
            (&self.object_vocab, &mut cfg.object_vocab),
            (&self.scene_vocab, &mut cfg.scene_vocab),
            (&self.action_embeddings, &mut cfg.action_embeddings),
            (&self.object_embeddings, &mut cfg.object_embeddings),
            (&self.scene_embeddings, &mut cfg.scene_embeddings),
            (&self.object_probs, &mut cfg.object_probs),
            (&self.scene_probs, &mut cfg.scene_probs),
            (&self.ground_truth, &mut cfg.ground_truth),
            (&self.pair_cache, &mut cfg.pair_cache),
        ];
        for (flag, field) in paths {
            if let Some(p) = flag {
                *field = Some(p.clone());
            }
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(m) = &self.method {
            cfg.method = m.parse()?;
        }
        if let Some(ms) = &self.methods {
            cfg.methods = ms.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        }
        if let Some(m) = &self.delta_baseline {
            cfg.delta_baseline = m.parse().map_err(|_| Error::config("delta_baseline", format!("unknown method {m:?}")))?;
        }
        if let Some(p) = &self.pool_size {
            cfg.pool_size = Some(p.parse().map_err(|_| Error::config("pool_size", format!("expected a count or `full`, got {p:?}")))?);
        }
        macro_rules! copy {
            ($($f:ident),*) => { $(if let Some(v) = self.$f.clone() { cfg.$f = v; })* };
        }
        copy!(k_objects, k_scenes, k_concatenation, k_compositions, lambda, seed, num_trials, subset_sizes);
        if let Some(n) = self.subset_size {
            cfg.subset_size = Some(n);
        }
        cfg.diversify &= !self.no_diversify;
        cfg.renormalize |= self.renormalize;
        cfg.normalize_before_sum |= self.normalize_before_sum;
        cfg.exclude_self_pairs |= self.exclude_self_pairs;
        cfg.clip_similarities |= self.clip_similarities;
        if let Some(t) = threads {
            cfg.threads = t;
        }
        Ok(cfg)
    }
}

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn output_dir(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    Ok(&cfg.output_dir)
}

fn warn_degenerate(engine: &Engine) {
    if let Some(space) = engine.space() {
        let n = space.degeneracy_count();
        if n > 0 {
            log::warn!("{n} similarities fell back to 0 because a composition vector cancelled out");
        }
    }
}

/// File-name-safe form of a label.
fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Serialize)]
struct ManifestEntry {
    action_label: String,
    file: String,
    members: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    method: Method,
    config: &'a RunConfig,
    actions: Vec<ManifestEntry>,
    generated_at_unix: u64,
}

/// Writes `selections/<action>.csv` for every action plus `manifest.json`.
pub fn run_select(cfg: &RunConfig) -> Result<PathBuf> {
    let methods = [cfg.method];
    let inputs = Inputs::load(cfg, &methods, false, false)?;
    let engine = inputs.engine(cfg, &methods)?;
    let all: Vec<usize> = (0..engine.actions().len()).collect();
    let support = engine.support(cfg.method, &all)?;
    warn_degenerate(&engine);

    let out = output_dir(cfg)?.join("selections");
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let actions = engine.actions().vocab();
    let object_label = |id: usize| engine.objects().map_or("", |t| t.vocab().label(id));
    let scene_label = |id: usize| engine.scenes().map_or("", |t| t.vocab().label(id));
    let n_objects = engine.objects().map_or(0, |t| t.len());
    let mut entries = Vec::new();
    for (i, &a) in all.iter().enumerate() {
        let label = actions.label(a);
        let name = format!("{:04}_{}.csv", a, file_stem(label));
        let path = out.join(&name);
        let mut w = csv::Writer::from_path(&path)?;
        let members = match &support {
            MethodSupport::Compositions { sets, .. } => {
                w.write_record(["action_label", "rank", "object_label", "scene_label", "similarity", "mmr_score"])?;
                for (rank, m) in sets[i].members.iter().enumerate() {
                    w.write_record([
                        label,
                        &(rank + 1).to_string(),
                        object_label(m.composition.object),
                        scene_label(m.composition.scene),
                        &m.similarity.to_string(),
                        &m.mmr_score.to_string(),
                    ])?;
                }
                sets[i].members.len()
            }
            other => {
                let lists: Vec<(&str, &[crate::selection::LabelScore])> = match other {
                    MethodSupport::Objects(l) => vec![("object", &l[i].members)],
                    MethodSupport::Scenes(l) => vec![("scene", &l[i].members)],
                    MethodSupport::Concatenation(l) => vec![("union", &l[i].members)],
                    MethodSupport::LateFusion { objects, scenes } => {
                        vec![("object", &objects[i].members), ("scene", &scenes[i].members)]
                    }
                    MethodSupport::Compositions { .. } => unreachable!(),
                };
                w.write_record(["action_label", "rank", "source", "label", "similarity"])?;
                let mut n = 0;
                for (source, members) in lists {
                    for (rank, m) in members.iter().enumerate() {
                        let (src, lbl) = match source {
                            "object" => ("object", object_label(m.id)),
                            "scene" => ("scene", scene_label(m.id)),
                            _ if m.id < n_objects => ("object", object_label(m.id)),
                            _ => ("scene", scene_label(m.id - n_objects)),
                        };
                        w.write_record([label, &(rank + 1).to_string(), src, lbl, &m.similarity.to_string()])?;
                    }
                    n += members.len();
                }
                n
            }
        };
        w.flush().map_err(|e| Error::io(&path, e))?;
        entries.push(ManifestEntry {
            action_label: label.to_owned(),
            file: format!("selections/{name}"),
            members,
        });
    }
    let manifest = Manifest {
        method: cfg.method,
        config: cfg,
        actions: entries,
        generated_at_unix: unix_time(),
    };
    let path = cfg.output_dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

#[derive(Serialize)]
struct ClassifyReport<'a> {
    method: Method,
    config: &'a RunConfig,
    num_videos: usize,
    num_actions: usize,
    accuracy: Option<f64>,
    generated_at_unix: u64,
}

fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["video_id", "predicted_action"])?;
    for p in predictions {
        w.write_record([p.video_id.as_str(), p.action_label.as_str()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `scores.csv`, `predictions.csv` and `report.json`; returns the
/// accuracy when ground truth is configured.
pub fn run_classify(cfg: &RunConfig) -> Result<Option<f64>> {
    let methods = [cfg.method];
    let with_truth = cfg.ground_truth.as_ref().is_some_and(|p| p.exists());
    let inputs = Inputs::load(cfg, &methods, true, with_truth)?;
    let engine = inputs.engine(cfg, &methods)?;
    let out_cls = engine.classify(cfg.method, &inputs.evidence(), None)?;
    warn_degenerate(&engine);
    let acc = inputs
        .truth
        .as_ref()
        .map(|t| accuracy(&out_cls.predictions, t))
        .transpose()?;

    let out = output_dir(cfg)?;
    let scores_path = out.join("scores.csv");
    let mut w = csv::Writer::from_path(&scores_path)?;
    w.write_record(["video_id", "action_label", "score"])?;
    let s = &out_cls.scores;
    for v in 0..s.num_videos() {
        for a in 0..s.num_actions() {
            w.write_record([s.video_ids[v].as_str(), s.action_labels[a].as_str(), &s.get(v, a).to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(&scores_path, e))?;
    write_predictions(&out.join("predictions.csv"), &out_cls.predictions)?;
    write_json(
        &out.join("report.json"),
        &ClassifyReport {
            method: cfg.method,
            config: cfg,
            num_videos: s.num_videos(),
            num_actions: s.num_actions(),
            accuracy: acc,
            generated_at_unix: unix_time(),
        },
    )?;
    Ok(acc)
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodEvaluation {
    pub method: Method,
    pub accuracy: f64,
    pub trials: Vec<TrialReport>,
}

/// Full-vocabulary accuracy and subset trials of every method, one trial
/// report per subset size.
pub fn evaluate_methods(cfg: &RunConfig, methods: &[Method], subset_sizes: &[usize]) -> Result<(Vec<MethodEvaluation>, Vec<Vec<Prediction>>, Inputs)> {
    let inputs = Inputs::load(cfg, methods, true, true)?;
    let engine = inputs.engine(cfg, methods)?;
    let truth = inputs.truth.as_ref().expect("ground truth was loaded");
    let mut evals = Vec::new();
    let mut preds = Vec::new();
    for &method in methods {
        let c = engine.classify(method, &inputs.evidence(), None)?;
        let trials = subset_sizes
            .iter()
            .map(|&n| run_subset_trials(&c.scores, truth, n, cfg.num_trials, cfg.seed))
            .collect::<Result<_>>()?;
        evals.push(MethodEvaluation {
            method,
            accuracy: accuracy(&c.predictions, truth)?,
            trials,
        });
        preds.push(c.predictions);
    }
    warn_degenerate(&engine);
    Ok((evals, preds, inputs))
}

#[derive(Serialize)]
struct EvaluationReport<'a> {
    config: &'a RunConfig,
    std_kind: &'static str,
    methods: &'a [MethodEvaluation],
    generated_at_unix: u64,
}

/// Writes `evaluation.json`, `trials.csv` and one per-action delta CSV per
/// method against the baseline.
pub fn run_evaluate(cfg: &RunConfig) -> Result<Vec<MethodEvaluation>> {
    let mut methods = cfg.methods.clone();
    if !methods.contains(&cfg.delta_baseline) {
        methods.push(cfg.delta_baseline);
    }
    let actions_n = crate::vocab::Vocabulary::load(
        cfg.action_vocab.as_ref().ok_or_else(|| Error::config("action_vocab", "is required"))?,
        crate::vocab::SourceKind::Actions,
    )?
    .len();
    let subset = cfg.subset_size.unwrap_or(actions_n);
    let (evals, preds, inputs) = evaluate_methods(cfg, &methods, &[subset])?;
    let out = output_dir(cfg)?;

    write_json(
        &out.join("evaluation.json"),
        &EvaluationReport {
            config: cfg,
            std_kind: "population",
            methods: &evals,
            generated_at_unix: unix_time(),
        },
    )?;

    let trials_path = out.join("trials.csv");
    let mut w = csv::Writer::from_path(&trials_path)?;
    w.write_record(["method", "subset_size", "trial", "subset_hash", "num_videos", "accuracy"])?;
    for e in &evals {
        for r in &e.trials {
            for t in &r.trials {
                w.write_record([
                    e.method.name(),
                    &r.subset_size.to_string(),
                    &t.trial.to_string(),
                    &t.subset_hash,
                    &t.num_videos.to_string(),
                    &t.accuracy.map_or(String::new(), |a| a.to_string()),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&trials_path, e))?;

    let truth = inputs.truth.as_ref().expect("ground truth was loaded");
    let base = methods.iter().position(|&m| m == cfg.delta_baseline).expect("baseline added above");
    for (i, &m) in methods.iter().enumerate() {
        if i == base {
            continue;
        }
        let rows = per_action_delta(&preds[i], &preds[base], truth, inputs.actions.vocab())?;
        let path = out.join(format!("delta_{}_vs_{}.csv", m.name(), cfg.delta_baseline.name()));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["action_label", "num_videos", "accuracy_a", "accuracy_b", "delta"])?;
        for r in rows {
            w.write_record([
                r.action_label.as_str(),
                &r.num_videos.to_string(),
                &r.accuracy_a.to_string(),
                &r.accuracy_b.to_string(),
                &r.delta.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(evals)
}

/// Writes `ablation.csv`: one row per method, a mean and std column pair
/// per subset size.
pub fn run_ablate(cfg: &RunConfig) -> Result<Vec<MethodEvaluation>> {
    let actions_n = crate::vocab::Vocabulary::load(
        cfg.action_vocab.as_ref().ok_or_else(|| Error::config("action_vocab", "is required"))?,
        crate::vocab::SourceKind::Actions,
    )?
    .len();
    let sizes = if cfg.subset_sizes.is_empty() {
        vec![cfg.subset_size.unwrap_or(actions_n)]
    } else {
        cfg.subset_sizes.clone()
    };
    let (evals, _, _) = evaluate_methods(cfg, &cfg.methods, &sizes)?;
    let out = output_dir(cfg)?;
    let path = out.join("ablation.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["method".to_owned()];
    for n in &sizes {
        header.push(format!("mean_{n}"));
        header.push(format!("std_{n}"));
    }
    w.write_record(&header)?;
    for e in &evals {
        let mut row = vec![e.method.name().to_owned()];
        for r in &e.trials {
            row.push(r.mean.to_string());
            row.push(r.std.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_json(
        &out.join("ablation.json"),
        &EvaluationReport {
            config: cfg,
            std_kind: "population",
            methods: &evals,
            generated_at_unix: unix_time(),
        },
    )?;
    Ok(evals)
}

/// Writes a planted fixture and its `config.json`.
pub fn run_fixtures(args: &FixtureArgs) -> Result<crate::fixtures::Fixture> {
    let mut spec = FixtureSpec::parse_size(&args.size, args.seed)?;
    spec.dim = args.dim;
    spec.validate()?;
    let fixture = generate(&spec)?;
    fixture.write(&args.output_dir)?;
    Ok(fixture)
}

pub const ORACLE_TOLERANCE: f64 = 1e-5;

/// Compares engine and oracle on the configured instance; a disagreement
/// is a data error after `oracle_check.json` is written.
pub fn run_oracle_check(cfg: &RunConfig) -> Result<EquivalenceReport> {
    let methods = cfg.methods.clone();
    let inputs = Inputs::load(cfg, &methods, true, false)?;
    let engine = inputs.engine(cfg, &methods)?;
    let report = check_against_engine(&engine, &inputs.evidence(), &methods, cfg.space_options(), ORACLE_TOLERANCE)?;
    write_json(&output_dir(cfg)?.join("oracle_check.json"), &report)?;
    if report.passed() {
        Ok(report)
    } else {
        Err(Error::Data(format!(
            "{} disagreements with the reference, first: {}",
            report.mismatches.len(),
            report.mismatches[0]
        )))
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker threads: {e}")))
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::Fixtures(args) => {
            let f = thread_pool(threads.unwrap_or(0))?.install(|| run_fixtures(&args))?;
            println!("wrote fixture to {} (attempt {})", args.output_dir.display(), f.attempt);
            for (m, a) in &f.accuracies {
                println!("{m}: accuracy {a:.4}");
            }
            Ok(())
        }
        Command::Select(o) => {
            let cfg = o.resolve(threads)?;
            let path = thread_pool(cfg.threads)?.install(|| run_select(&cfg))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Classify(o) => {
            let cfg = o.resolve(threads)?;
            let acc = thread_pool(cfg.threads)?.install(|| run_classify(&cfg))?;
            match acc {
                Some(a) => println!("{}: accuracy {a:.4}", cfg.method),
                None => println!("{}: wrote predictions to {}", cfg.method, cfg.output_dir.display()),
            }
            Ok(())
        }
        Command::Evaluate(o) => {
            let cfg = o.resolve(threads)?;
            let evals = thread_pool(cfg.threads)?.install(|| run_evaluate(&cfg))?;
            for e in evals {
                let t = &e.trials[0];
                println!(
                    "{}: accuracy {:.4}, {} trials of {} actions {:.4} ± {:.4}",
                    e.method, e.accuracy, t.num_trials, t.subset_size, t.mean, t.std
                );
            }
            Ok(())
        }
        Command::Ablate(o) => {
            let cfg = o.resolve(threads)?;
            thread_pool(cfg.threads)?.install(|| run_ablate(&cfg))?;
            println!("wrote {}", cfg.output_dir.join("ablation.csv").display());
            Ok(())
        }
        Command::OracleCheck(o) => {
            let cfg = o.resolve(threads)?;
            let r = thread_pool(cfg.threads)?.install(|| run_oracle_check(&cfg))?;
            println!(
                "oracle check passed: {} sets, {} scores, {} predictions, max relative error {:.3e}",
                r.set_checks, r.score_checks, r.prediction_checks, r.max_relative_error
            );
            Ok(())
        }
    }
}

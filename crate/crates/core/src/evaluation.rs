//! Accuracy, seeded action-subset trials and per-action comparisons.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inference::{Prediction, ScoreMatrix};
use crate::vocab::Vocabulary;

/// The true action of every test video.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    labels: BTreeMap<String, usize>,
}

impl GroundTruth {
    pub fn new<I, S>(pairs: I, actions: &Vocabulary) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut labels = BTreeMap::new();
        for (video, action) in pairs {
            let video = video.into();
            if action >= actions.len() {
                return Err(Error::Data(format!("video {video:?} has action id {action} outside the vocabulary")));
            }
            if labels.insert(video.clone(), action).is_some() {
                return Err(Error::Data(format!("video {video:?} is labelled twice")));
            }
        }
        Ok(Self { labels })
    }

    /// Reads a `video_id,action_label` CSV.
    pub fn load(path: &Path, actions: &Vocabulary) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::Data(format!("{}: {other:?}", path.display())),
            })?;
        let header = reader.headers()?.clone();
        if header.len() != 2 || &header[0] != "video_id" || &header[1] != "action_label" {
            return Err(Error::Schema(format!(
                "{}: expected header video_id,action_label",
                path.display()
            )));
        }
        let mut pairs = Vec::new();
        for record in reader.records() {
            let record = record?;
            let action = actions.id(&record[1]).ok_or_else(|| Error::Lookup {
                kind: "action",
                name: record[1].to_owned(),
            })?;
            pairs.push((record[0].to_owned(), action));
        }
        Self::new(pairs, actions)
    }

    pub fn save(&self, path: &Path, actions: &Vocabulary) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["video_id", "action_label"])?;
        for (video, &action) in &self.labels {
            w.write_record([video.as_str(), actions.label(action)])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn action_of(&self, video_id: &str) -> Option<usize> {
        self.labels.get(video_id).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> + '_ {
        self.labels.iter().map(|(v, &a)| (v.as_str(), a))
    }

    fn require(&self, video_id: &str) -> Result<usize> {
        self.action_of(video_id)
            .ok_or_else(|| Error::Data(format!("video {video_id:?} has no ground-truth entry")))
    }
}

/// Fraction of predictions that match the ground truth.
pub fn accuracy(predictions: &[Prediction], truth: &GroundTruth) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Argument("no predictions to evaluate".into()));
    }
    let mut correct = 0usize;
    for p in predictions {
        if truth.require(&p.video_id)? == p.action_id {
            correct += 1;
        }
    }
    Ok(correct as f64 / predictions.len() as f64)
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `i`'s generator: the `(i + 1)`-th splitmix64 output
/// started from `seed`.
pub fn trial_stream_seed(seed: u64, trial: usize) -> u64 {
    splitmix64(seed.wrapping_add((trial as u64 + 1).wrapping_mul(GOLDEN_GAMMA)))
}

/// The action columns of one trial, sorted ascending.
pub fn sample_action_subset(num_actions: usize, subset_size: usize, seed: u64, trial: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_stream_seed(seed, trial));
    let mut picked = rand::seq::index::sample(&mut rng, num_actions, subset_size).into_vec();
    picked.sort_unstable();
    picked
}

/// First 16 hex digits of the SHA-256 of the newline-joined labels.
pub fn subset_hash<S: AsRef<str>>(labels: &[S]) -> String {
    let mut h = Sha256::new();
    for (i, l) in labels.iter().enumerate() {
        if i > 0 {
            h.update(b"\n");
        }
        h.update(l.as_ref().as_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub stream_seed: u64,
    pub subset_hash: String,
    pub actions: Vec<String>,
    pub num_videos: usize,
    /// `None` when no test video belongs to the sampled actions.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub subset_size: usize,
    pub num_trials: usize,
    pub seed: u64,
    /// Accuracies of the trials that had videos, in trial order.
    pub per_trial_accuracy: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub trials: Vec<TrialRecord>,
}

/// Mean and population standard deviation. Identical values give that
/// value and exactly zero.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let Some(&first) = values.first() else {
        return (f64::NAN, f64::NAN);
    };
    if values.iter().all(|&v| v == first) {
        return (first, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Repeats n-way classification over random action subsets: each trial
/// keeps the videos of `subset_size` sampled actions and predicts the
/// best-scoring action among those only.
///
/// `scores` must hold every action so that the same seed gives the same
/// subsets whatever method produced the scores.
pub fn run_subset_trials(
    scores: &ScoreMatrix,
    truth: &GroundTruth,
    subset_size: usize,
    num_trials: usize,
    seed: u64,
) -> Result<TrialReport> {
    let n_actions = scores.num_actions();
    if subset_size == 0 || subset_size > n_actions {
        return Err(Error::config(
            "subset_size",
            format!("must be between 1 and the number of actions ({n_actions}), got {subset_size}"),
        ));
    }
    if num_trials == 0 {
        return Err(Error::config("num_trials", "must be at least 1"));
    }
    let video_truth: Vec<usize> = scores
        .video_ids
        .iter()
        .map(|v| truth.require(v))
        .collect::<Result<_>>()?;
    let column_of: HashMap<usize, usize> = scores.action_ids.iter().enumerate().map(|(c, &a)| (a, c)).collect();

    let trials: Vec<TrialRecord> = (0..num_trials)
        .into_par_iter()
        .map(|t| {
            let cols = sample_action_subset(n_actions, subset_size, seed, t);
            let mut in_subset = vec![false; n_actions];
            for &c in &cols {
                in_subset[c] = true;
            }
            let mut seen = 0usize;
            let mut correct = 0usize;
            for (v, &a) in video_truth.iter().enumerate() {
                let Some(&col) = column_of.get(&a) else { continue };
                if !in_subset[col] {
                    continue;
                }
                seen += 1;
                if scores.argmax_among(v, cols.iter().copied()) == Some(col) {
                    correct += 1;
                }
            }
            let actions: Vec<String> = cols.iter().map(|&c| scores.action_labels[c].clone()).collect();
            TrialRecord {
                trial: t,
                stream_seed: trial_stream_seed(seed, t),
                subset_hash: subset_hash(&actions),
                actions,
                num_videos: seen,
                accuracy: (seen > 0).then(|| correct as f64 / seen as f64),
            }
        })
        .collect();

    for t in trials.iter().filter(|t| t.accuracy.is_none()) {
        log::warn!("trial {} has no videos for its sampled actions and is excluded", t.trial);
    }
    let per_trial_accuracy: Vec<f64> = trials.iter().filter_map(|t| t.accuracy).collect();
    if per_trial_accuracy.is_empty() {
        return Err(Error::Data("no trial had any video of its sampled actions".into()));
    }
    let (mean, std) = mean_std(&per_trial_accuracy);
    Ok(TrialReport {
        subset_size,
        num_trials,
        seed,
        per_trial_accuracy,
        mean,
        std,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionDelta {
    pub action_id: usize,
    pub action_label: String,
    pub num_videos: usize,
    pub accuracy_a: f64,
    pub accuracy_b: f64,
    pub delta: f64,
}

/// Per-action recall of two methods over the same videos, sorted by
/// `accuracy_a − accuracy_b` descending, then by action id.
pub fn per_action_delta(
    a: &[Prediction],
    b: &[Prediction],
    truth: &GroundTruth,
    actions: &Vocabulary,
) -> Result<Vec<ActionDelta>> {
    if a.len() != b.len() {
        return Err(Error::Data(format!(
            "prediction sets cover {} and {} videos",
            a.len(),
            b.len()
        )));
    }
    let b_by_video: HashMap<&str, usize> = b.iter().map(|p| (p.video_id.as_str(), p.action_id)).collect();
    if b_by_video.len() != b.len() {
        return Err(Error::Data("second prediction set repeats a video".into()));
    }
    // action -> (videos, correct under a, correct under b)
    let mut counts: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for p in a {
        let other = *b_by_video
            .get(p.video_id.as_str())
            .ok_or_else(|| Error::Data(format!("video {:?} is missing from the second prediction set", p.video_id)))?;
        let truth_a = truth.require(&p.video_id)?;
        let e = counts.entry(truth_a).or_default();
        e.0 += 1;
        e.1 += usize::from(p.action_id == truth_a);
        e.2 += usize::from(other == truth_a);
    }
    let mut rows: Vec<ActionDelta> = counts
        .into_iter()
        .map(|(action, (n, ca, cb))| {
            let accuracy_a = ca as f64 / n as f64;
            let accuracy_b = cb as f64 / n as f64;
            ActionDelta {
                action_id: action,
                action_label: actions.label(action).to_owned(),
                num_videos: n,
                accuracy_a,
                accuracy_b,
                delta: accuracy_a - accuracy_b,
            }
        })
        .collect();
    rows.sort_by(|x, y| y.delta.total_cmp(&x.delta).then(x.action_id.cmp(&y.action_id)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::Method;
    use crate::vocab::SourceKind;
    use proptest::prelude::*;

    fn actions(n: usize) -> Vocabulary {
        Vocabulary::new(SourceKind::Actions, (0..n).map(|i| format!("act{i}"))).unwrap()
    }

    fn preds(ids: &[usize]) -> Vec<Prediction> {
        ids.iter()
            .enumerate()
            .map(|(v, &a)| Prediction {
                video_id: format!("v{v}"),
                action_id: a,
                action_label: format!("act{a}"),
                score: 0.0,
                method: Method::Compositions,
            })
            .collect()
    }

    fn truth(ids: &[usize], n: usize) -> GroundTruth {
        GroundTruth::new(ids.iter().enumerate().map(|(v, &a)| (format!("v{v}"), a)), &actions(n)).unwrap()
    }

    #[test]
    fn accuracy_examples() {
        let t = truth(&[0, 1, 2, 0], 3);
        assert_eq!(accuracy(&preds(&[0, 1, 2, 0]), &t).unwrap(), 1.0);
        assert_eq!(accuracy(&preds(&[1, 2, 0, 1]), &t).unwrap(), 0.0);
        assert_eq!(accuracy(&preds(&[0, 1, 2, 2]), &t).unwrap(), 0.75);
        let short = truth(&[0], 3);
        assert!(matches!(accuracy(&preds(&[0, 1]), &short), Err(Error::Data(m)) if m.contains("v1")));
    }

    #[test]
    fn mean_std_edge_cases() {
        assert_eq!(mean_std(&[0.3]), (0.3, 0.0));
        assert_eq!(mean_std(&[0.1; 10]), (0.1, 0.0));
        let (m, s) = mean_std(&[0.0, 1.0]);
        assert_eq!((m, s), (0.5, 0.5));
    }

    fn score_matrix(n_videos: usize, n_actions: usize, seed: u64) -> (ScoreMatrix, GroundTruth) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = (0..n_videos * n_actions).map(|_| rng.random::<f64>()).collect();
        let m = ScoreMatrix::new(
            (0..n_videos).map(|v| format!("v{v}")).collect(),
            (0..n_actions).collect(),
            (0..n_actions).map(|a| format!("act{a}")).collect(),
            scores,
        )
        .unwrap();
        let t = truth(&(0..n_videos).map(|v| v % n_actions).collect::<Vec<_>>(), n_actions);
        (m, t)
    }

    #[test]
    fn full_subset_has_zero_spread() {
        let (m, t) = score_matrix(40, 7, 1);
        let r = run_subset_trials(&m, &t, 7, 10, 42).unwrap();
        assert_eq!(r.std, 0.0);
        assert_eq!(r.per_trial_accuracy.len(), 10);
        let full = accuracy(&crate::inference::predict_all(&m, Method::Compositions).unwrap(), &t).unwrap();
        assert_eq!(r.mean, full);
    }

    #[test]
    fn single_trial_has_zero_spread() {
        let (m, t) = score_matrix(40, 7, 2);
        let r = run_subset_trials(&m, &t, 3, 1, 9).unwrap();
        assert_eq!(r.std, 0.0);
        assert_eq!(r.mean, r.per_trial_accuracy[0]);
    }

    #[test]
    fn trials_replay_and_subsets_ignore_scores() {
        let (m1, t) = score_matrix(40, 9, 3);
        let (m2, _) = score_matrix(40, 9, 4);
        let a = run_subset_trials(&m1, &t, 4, 6, 77).unwrap();
        assert_eq!(a, run_subset_trials(&m1, &t, 4, 6, 77).unwrap());
        let b = run_subset_trials(&m2, &t, 4, 6, 77).unwrap();
        let hashes = |r: &TrialReport| r.trials.iter().map(|t| t.subset_hash.clone()).collect::<Vec<_>>();
        assert_eq!(hashes(&a), hashes(&b));
    }

    #[test]
    fn trials_reject_oversized_subsets() {
        let (m, t) = score_matrix(5, 3, 5);
        assert!(matches!(run_subset_trials(&m, &t, 4, 2, 0), Err(Error::Config { .. })));
    }

    #[test]
    fn trial_accuracy_matches_a_counting_oracle() {
        let (m, t) = score_matrix(60, 8, 6);
        let r = run_subset_trials(&m, &t, 3, 5, 11).unwrap();
        for rec in &r.trials {
            let cols: Vec<usize> = rec.actions.iter().map(|l| l[3..].parse().unwrap()).collect();
            let mut n = 0;
            let mut ok = 0;
            for v in 0..60 {
                let truth_a = v % 8;
                if !cols.contains(&truth_a) {
                    continue;
                }
                n += 1;
                let row = m.row(v);
                let mut best = cols[0];
                for &c in &cols[1..] {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                ok += usize::from(best == truth_a);
            }
            assert_eq!(rec.num_videos, n);
            assert_eq!(rec.accuracy, Some(ok as f64 / n as f64));
        }
    }

    #[test]
    fn delta_examples() {
        let t = truth(&[0, 1, 0, 1], 2);
        let same = per_action_delta(&preds(&[0, 0, 0, 0]), &preds(&[0, 0, 0, 0]), &t, &actions(2)).unwrap();
        assert!(same.iter().all(|d| d.delta == 0.0));
        let d = per_action_delta(&preds(&[0, 1, 0, 1]), &preds(&[1, 0, 1, 0]), &t, &actions(2)).unwrap();
        assert!(d.iter().all(|d| d.delta == 1.0));
        let mixed = per_action_delta(&preds(&[0, 0, 0, 0]), &preds(&[1, 1, 1, 1]), &t, &actions(2)).unwrap();
        assert_eq!(mixed[0].action_label, "act0");
        assert_eq!(mixed[0].delta, 1.0);
        assert_eq!(mixed[1].delta, -1.0);
        assert!(per_action_delta(&preds(&[0, 0]), &preds(&[0, 0, 0]), &t, &actions(2)).is_err());
    }

    #[test]
    fn subset_hash_is_stable() {
        assert_eq!(subset_hash(&["a", "b"]).len(), 16);
        assert_ne!(subset_hash(&["a", "b"]), subset_hash(&["ab"]));
    }

    proptest! {
        #[test]
        fn accuracy_ignores_video_order(ids in proptest::collection::vec(0usize..4, 1..30), rot in 0usize..30) {
            let t = truth(&ids.iter().map(|i| (i * 3) % 4).collect::<Vec<_>>(), 4);
            let mut p = preds(&ids);
            let before = accuracy(&p, &t).unwrap();
            let r = rot % p.len();
            p.rotate_left(r);
            prop_assert_eq!(accuracy(&p, &t).unwrap(), before);
        }

        #[test]
        fn class_recalls_average_to_accuracy(ids in proptest::collection::vec(0usize..5, 1..40), guess in proptest::collection::vec(0usize..5, 40)) {
            let t = truth(&ids, 5);
            let p = preds(&guess[..ids.len()]);
            let rows = per_action_delta(&p, &p, &t, &actions(5)).unwrap();
            let weighted: f64 = rows.iter().map(|r| r.accuracy_a * r.num_videos as f64).sum::<f64>() / ids.len() as f64;
            prop_assert!((weighted - accuracy(&p, &t).unwrap()).abs() < 1e-9);
        }
    }
}

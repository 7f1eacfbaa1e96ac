//! Action scores ℓ(a, v), argmax predictions and the single-source baselines.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::ProbabilityMatrix;
use crate::selection::{ActionCompositionSet, LabelScore};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Compositions,
    CompositionsWeightedScoring,
    CompositionsWeightedSelection,
    ObjectOnly,
    SceneOnly,
    Concatenation,
    LateFusion,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::ObjectOnly,
        Method::SceneOnly,
        Method::Concatenation,
        Method::LateFusion,
        Method::Compositions,
        Method::CompositionsWeightedSelection,
        Method::CompositionsWeightedScoring,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Compositions => "compositions",
            Method::CompositionsWeightedScoring => "compositions_weighted_scoring",
            Method::CompositionsWeightedSelection => "compositions_weighted_selection",
            Method::ObjectOnly => "object_only",
            Method::SceneOnly => "scene_only",
            Method::Concatenation => "concatenation",
            Method::LateFusion => "late_fusion",
        }
    }

    pub fn uses_compositions(self) -> bool {
        matches!(
            self,
            Method::Compositions | Method::CompositionsWeightedScoring | Method::CompositionsWeightedSelection
        )
    }

    pub fn needs_objects(self) -> bool {
        self != Method::SceneOnly
    }

    pub fn needs_scenes(self) -> bool {
        self != Method::ObjectOnly
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("method", format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    None,
    InScoring,
}

#[inline]
fn clipped(s: f64, clip: bool) -> f64 {
    if clip {
        s.max(0.0)
    } else {
        s
    }
}

/// ℓ(a, v) = Σ s(c′, a) · p(c′_o | v) · p(c′_s | v) over the selected set,
/// each term also scaled by cos(φ_o, φ_s) under [`WeightMode::InScoring`].
pub fn score_action(
    objects_row: &[f64],
    scenes_row: &[f64],
    set: &ActionCompositionSet,
    weight_mode: WeightMode,
    clip: bool,
) -> Result<f64> {
    if set.members.is_empty() {
        return Err(Error::Argument(format!("action {} has an empty composition set", set.action_id)));
    }
    let mut total = 0.0;
    for m in &set.members {
        let c = m.composition;
        let (Some(p_o), Some(p_s)) = (objects_row.get(c.object), scenes_row.get(c.scene)) else {
            return Err(Error::Schema(format!(
                "composition ({}, {}) is outside the {}×{} probability rows",
                c.object,
                c.scene,
                objects_row.len(),
                scenes_row.len()
            )));
        };
        let mut term = clipped(m.similarity, clip) * (p_o * p_s);
        if weight_mode == WeightMode::InScoring {
            term *= m.weight;
        }
        total += term;
    }
    Ok(total)
}

/// Σ s(label, a) · p(label | v) over a single-source top-k list.
pub fn score_single_source(row: &[f64], labels: &[LabelScore], clip: bool) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Argument("empty label set".into()));
    }
    let mut total = 0.0;
    for l in labels {
        let p = row.get(l.id).ok_or_else(|| {
            Error::Schema(format!("label id {} is outside a row of {} labels", l.id, row.len()))
        })?;
        total += clipped(l.similarity, clip) * p;
    }
    Ok(total)
}

/// Single-source scoring over the row `objects ⊕ scenes`; label ids at or
/// above `objects_row.len()` address the scene part.
pub fn score_concatenation(objects_row: &[f64], scenes_row: &[f64], labels: &[LabelScore], clip: bool) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Argument("empty label set".into()));
    }
    let n_o = objects_row.len();
    let mut total = 0.0;
    for l in labels {
        let p = if l.id < n_o {
            objects_row[l.id]
        } else {
            *scenes_row.get(l.id - n_o).ok_or_else(|| {
                Error::Schema(format!("label id {} is outside the concatenated row of {}", l.id, n_o + scenes_row.len()))
            })?
        };
        total += clipped(l.similarity, clip) * p;
    }
    Ok(total)
}

/// Mean of the object-only and scene-only scores of an action.
pub fn score_late_fusion(object_score: f64, scene_score: f64) -> f64 {
    (object_score + scene_score) / 2.0
}

/// A single-source top-k list for one action.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelSet {
    pub action_id: usize,
    pub members: Vec<LabelScore>,
}

/// Everything a method needs per action to score videos.
#[derive(Debug, Clone)]
pub enum MethodSupport {
    Compositions {
        sets: Vec<ActionCompositionSet>,
        weight_mode: WeightMode,
    },
    Objects(Vec<LabelSet>),
    Scenes(Vec<LabelSet>),
    /// Label ids index `objects ⊕ scenes`.
    Concatenation(Vec<LabelSet>),
    LateFusion {
        objects: Vec<LabelSet>,
        scenes: Vec<LabelSet>,
    },
}

impl MethodSupport {
    pub fn action_ids(&self) -> Vec<usize> {
        match self {
            MethodSupport::Compositions { sets, .. } => sets.iter().map(|s| s.action_id).collect(),
            MethodSupport::Objects(l) | MethodSupport::Scenes(l) | MethodSupport::Concatenation(l) => {
                l.iter().map(|s| s.action_id).collect()
            }
            MethodSupport::LateFusion { objects, .. } => objects.iter().map(|s| s.action_id).collect(),
        }
    }

    fn needs(&self) -> (bool, bool) {
        match self {
            MethodSupport::Objects(_) => (true, false),
            MethodSupport::Scenes(_) => (false, true),
            _ => (true, true),
        }
    }

    fn score_column(&self, col: usize, objects_row: &[f64], scenes_row: &[f64], clip: bool) -> Result<f64> {
        match self {
            MethodSupport::Compositions { sets, weight_mode } => {
                score_action(objects_row, scenes_row, &sets[col], *weight_mode, clip)
            }
            MethodSupport::Objects(l) => score_single_source(objects_row, &l[col].members, clip),
            MethodSupport::Scenes(l) => score_single_source(scenes_row, &l[col].members, clip),
            MethodSupport::Concatenation(l) => score_concatenation(objects_row, scenes_row, &l[col].members, clip),
            MethodSupport::LateFusion { objects, scenes } => Ok(score_late_fusion(
                score_single_source(objects_row, &objects[col].members, clip)?,
                score_single_source(scenes_row, &scenes[col].members, clip)?,
            )),
        }
    }
}

/// Videos × actions scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreMatrix {
    pub video_ids: Vec<String>,
    pub action_ids: Vec<usize>,
    pub action_labels: Vec<String>,
    scores: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(video_ids: Vec<String>, action_ids: Vec<usize>, action_labels: Vec<String>, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != video_ids.len() * action_ids.len() || action_labels.len() != action_ids.len() {
            return Err(Error::Schema(format!(
                "{} scores for {} videos × {} actions",
                scores.len(),
                video_ids.len(),
                action_ids.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite score for video {:?}",
                video_ids[i / action_ids.len()]
            )));
        }
        Ok(Self {
            video_ids,
            action_ids,
            action_labels,
            scores,
        })
    }

    pub fn num_videos(&self) -> usize {
        self.video_ids.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_ids.len()
    }

    pub fn row(&self, video: usize) -> &[f64] {
        let n = self.action_ids.len();
        &self.scores[video * n..(video + 1) * n]
    }

    pub fn get(&self, video: usize, col: usize) -> f64 {
        self.row(video)[col]
    }

    pub fn video_index(&self, video_id: &str) -> Option<usize> {
        self.video_ids.iter().position(|v| v == video_id)
    }

    /// Column index of the best-scoring action among `cols`; ties go to
    /// the lowest action id.
    pub fn argmax_among(&self, video: usize, cols: impl IntoIterator<Item = usize>) -> Option<usize> {
        let row = self.row(video);
        let mut best: Option<usize> = None;
        for c in cols {
            best = match best {
                None => Some(c),
                Some(b) => {
                    let better = row[c] > row[b] || (row[c] == row[b] && self.action_ids[c] < self.action_ids[b]);
                    Some(if better { c } else { b })
                }
            };
        }
        best
    }

    /// Multiplies every score by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            scores: self.scores.iter().map(|s| s * factor).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub video_id: String,
    pub action_id: usize,
    pub action_label: String,
    pub score: f64,
    pub method: Method,
}

fn prediction_at(scores: &ScoreMatrix, video: usize, method: Method) -> Result<Prediction> {
    let col = scores
        .argmax_among(video, 0..scores.num_actions())
        .ok_or_else(|| Error::Argument("score matrix has no actions".into()))?;
    Ok(Prediction {
        video_id: scores.video_ids[video].clone(),
        action_id: scores.action_ids[col],
        action_label: scores.action_labels[col].clone(),
        score: scores.get(video, col),
        method,
    })
}

/// f(v) = argmax_a ℓ(a, v).
pub fn predict(scores: &ScoreMatrix, video_id: &str, method: Method) -> Result<Prediction> {
    let v = scores.video_index(video_id).ok_or_else(|| Error::Lookup {
        kind: "video",
        name: video_id.to_owned(),
    })?;
    prediction_at(scores, v, method)
}

pub fn predict_all(scores: &ScoreMatrix, method: Method) -> Result<Vec<Prediction>> {
    (0..scores.num_videos())
        .map(|v| prediction_at(scores, v, method))
        .collect()
}

/// Object and scene probability rows for the videos being classified.
#[derive(Debug, Clone, Copy, Default)]
pub struct Evidence<'a> {
    pub objects: Option<&'a ProbabilityMatrix>,
    pub scenes: Option<&'a ProbabilityMatrix>,
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub method: Method,
    pub scores: ScoreMatrix,
    pub predictions: Vec<Prediction>,
}

/// Scores every video against every action in `support` and predicts.
pub fn classify_batch(
    evidence: &Evidence<'_>,
    support: &MethodSupport,
    actions: &Vocabulary,
    method: Method,
    clip: bool,
) -> Result<Classification> {
    let (need_o, need_s) = support.needs();
    let objects = if need_o {
        Some(evidence.objects.ok_or_else(|| Error::Argument(format!("{method} needs object probabilities")))?)
    } else {
        None
    };
    let scenes = if need_s {
        Some(evidence.scenes.ok_or_else(|| Error::Argument(format!("{method} needs scene probabilities")))?)
    } else {
        None
    };
    let video_ids = match (objects, scenes) {
        (Some(o), Some(s)) => {
            if o.video_ids() != s.video_ids() {
                return Err(Error::Schema(
                    "object and scene probability matrices list different videos".into(),
                ));
            }
            o.video_ids().to_vec()
        }
        (Some(m), None) | (None, Some(m)) => m.video_ids().to_vec(),
        (None, None) => unreachable!("every method reads at least one source"),
    };

    let action_ids = support.action_ids();
    let action_labels: Vec<String> = action_ids.iter().map(|&a| actions.label(a).to_owned()).collect();
    let rows: Vec<Vec<f64>> = (0..video_ids.len())
        .into_par_iter()
        .map(|v| {
            let o_row = objects.map_or(&[][..], |m| m.row(v));
            let s_row = scenes.map_or(&[][..], |m| m.row(v));
            (0..action_ids.len())
                .map(|col| support.score_column(col, o_row, s_row, clip))
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| Error::Data(format!("video {:?}: {e}", video_ids[v])))
        })
        .collect::<Result<_>>()?;
    let scores = ScoreMatrix::new(video_ids, action_ids, action_labels, rows.concat())?;
    let predictions = predict_all(&scores, method)?;
    Ok(Classification {
        method,
        scores,
        predictions,
    })
}

//! Video-level object and scene likelihoods.
//!
//! A [`ProbabilityMatrix`] holds one row-stochastic row per video, columns in
//! vocabulary order. Per-frame softmax outputs are reduced to video rows with
//! [`aggregate_frames`] before they ever reach a matrix.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binio;
use crate::error::{Error, Result};
use crate::vocab::{SourceKind, Vocabulary};

pub const MATRIX_MAGIC: &[u8; 4] = b"ZSPM";
pub const MATRIX_VERSION: u32 = 1;

/// Allowed deviation of a row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    Csv,
    ZspmBinary,
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "zspm_binary" => Ok(Self::ZspmBinary),
            other => Err(Error::config(
                "probability_format",
                format!("unknown format {other:?}"),
            )),
        }
    }
}

/// Per-frame softmax rows of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameProbabilityBlock {
    pub video_id: String,
    pub frames: Vec<Vec<f64>>,
}

/// Elementwise mean of the frame rows.
pub fn aggregate_frames(block: &FrameProbabilityBlock) -> Result<Vec<f64>> {
    let first = block.frames.first().ok_or_else(|| {
        Error::Argument(format!("video {:?} has no frames", block.video_id))
    })?;
    let cols = first.len();
    let mut mean = vec![0.0; cols];
    for (f, frame) in block.frames.iter().enumerate() {
        if frame.len() != cols {
            return Err(Error::Argument(format!(
                "video {:?} frame {f} has {} columns, expected {cols}",
                block.video_id,
                frame.len()
            )));
        }
        let sum: f64 = frame.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::Data(format!(
                "video {:?} frame {f} sums to {sum}",
                block.video_id
            )));
        }
        mean.iter_mut().zip(frame).for_each(|(m, x)| *m += x);
    }
    let n = block.frames.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// p(c_o | v) · p(c_s | v).
pub fn composition_likelihood(objects_row: &[f64], scenes_row: &[f64], object: usize, scene: usize) -> Result<f64> {
    let p_o = objects_row.get(object).ok_or_else(|| {
        Error::Argument(format!("object id {object} out of range ({})", objects_row.len()))
    })?;
    let p_s = scenes_row.get(scene).ok_or_else(|| {
        Error::Argument(format!("scene id {scene} out of range ({})", scenes_row.len()))
    })?;
    Ok(p_o * p_s)
}

/// Videos × labels likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    kind: SourceKind,
    labels: Vec<String>,
    video_ids: Vec<String>,
    video_index: HashMap<String, usize>,
    values: Vec<f64>,
}

impl ProbabilityMatrix {
    /// Validates and wraps row-major `values`. Rows whose sum is off by more
    /// than [`ROW_SUM_TOLERANCE`] are rescaled when `renormalize` is set and
    /// rejected otherwise.
    pub fn new(vocab: &Vocabulary, video_ids: Vec<String>, mut values: Vec<f64>, renormalize: bool) -> Result<Self> {
        let cols = vocab.len();
        if values.len() != video_ids.len() * cols {
            return Err(Error::Schema(format!(
                "{} values for {} videos × {cols} labels",
                values.len(),
                video_ids.len()
            )));
        }
        let mut video_index = HashMap::with_capacity(video_ids.len());
        for (i, id) in video_ids.iter().enumerate() {
            if video_index.insert(id.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate video id {id:?}")));
            }
        }
        for (r, row) in values.chunks_exact_mut(cols.max(1)).enumerate().take(video_ids.len()) {
            let video = &video_ids[r];
            for (c, &x) in row.iter().enumerate() {
                if !x.is_finite() || !(0.0..=1.0).contains(&x) {
                    return Err(Error::Data(format!(
                        "entry {x} at video {video:?}, label {:?} is not a probability",
                        vocab.label(c)
                    )));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                if !renormalize || sum == 0.0 {
                    return Err(Error::Data(format!(
                        "row of video {video:?} sums to {sum}, not 1 ± {ROW_SUM_TOLERANCE}"
                    )));
                }
                log::warn!("renormalizing row of video {video:?} (sum {sum})");
                row.iter_mut().for_each(|x| *x /= sum);
            }
        }
        Ok(Self {
            kind: vocab.kind(),
            labels: vocab.labels().to_vec(),
            video_ids,
            video_index,
            values,
        })
    }

    /// Aggregates every block's frames into one row.
    pub fn from_frames(vocab: &Vocabulary, blocks: &[FrameProbabilityBlock]) -> Result<Self> {
        let mut values = Vec::with_capacity(blocks.len() * vocab.len());
        for block in blocks {
            let row = aggregate_frames(block)?;
            if row.len() != vocab.len() {
                return Err(Error::Schema(format!(
                    "video {:?} has {} columns, vocabulary has {}",
                    block.video_id,
                    row.len(),
                    vocab.len()
                )));
            }
            values.extend(row);
        }
        let ids = blocks.iter().map(|b| b.video_id.clone()).collect();
        Self::new(vocab, ids, values, false)
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn video_ids(&self) -> &[String] {
        &self.video_ids
    }

    pub fn num_videos(&self) -> usize {
        self.video_ids.len()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, video: usize) -> &[f64] {
        let c = self.labels.len();
        &self.values[video * c..(video + 1) * c]
    }

    pub fn video_index(&self, video_id: &str) -> Option<usize> {
        self.video_index.get(video_id).copied()
    }

    pub fn row_by_id(&self, video_id: &str) -> Option<&[f64]> {
        self.video_index(video_id).map(|i| self.row(i))
    }

    pub fn matches_vocab(&self, vocab: &Vocabulary) -> bool {
        self.labels == vocab.labels()
    }

    /// Matrix restricted to the given video rows, in order.
    pub fn select_videos(&self, rows: &[usize]) -> Self {
        let video_ids: Vec<String> = rows.iter().map(|&r| self.video_ids[r].clone()).collect();
        let video_index = video_ids.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        let values = rows.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        Self {
            kind: self.kind,
            labels: self.labels.clone(),
            video_ids,
            video_index,
            values,
        }
    }

    pub fn save(&self, path: &Path, format: MatrixFormat) -> Result<()> {
        match format {
            MatrixFormat::Csv => self.save_csv(path),
            MatrixFormat::ZspmBinary => self.save_zspm(path),
        }
    }

    fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["video_id".to_owned()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (r, id) in self.video_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.row(r).iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn save_zspm(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        binio::write_header(&mut w, MATRIX_MAGIC, MATRIX_VERSION).map_err(io)?;
        binio::write_u64(&mut w, self.num_videos() as u64).map_err(io)?;
        binio::write_u64(&mut w, self.num_labels() as u64).map_err(io)?;
        binio::write_f32s(&mut w, self.values.iter().copied()).map_err(io)?;
        for id in &self.video_ids {
            binio::write_string(&mut w, id).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Loads a matrix whose columns must be exactly `vocab`, in order.
pub fn load_probability_matrix(
    path: impl AsRef<Path>,
    format: MatrixFormat,
    vocab: &Vocabulary,
    renormalize: bool,
) -> Result<ProbabilityMatrix> {
    let path = path.as_ref();
    match format {
        MatrixFormat::Csv => load_csv(path, vocab, renormalize),
        MatrixFormat::ZspmBinary => load_zspm(path, vocab, renormalize),
    }
}

fn load_csv(path: &Path, vocab: &Vocabulary, renormalize: bool) -> Result<ProbabilityMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut records = reader.records();
    let header = records
        .next()
        .transpose()?
        .ok_or_else(|| Error::Schema(format!("{}: empty file", path.display())))?;
    let columns: Vec<&str> = header.iter().skip(1).map(str::trim).collect();
    if let Some(pos) = columns
        .iter()
        .zip(vocab.labels())
        .position(|(col, label)| col != label)
    {
        return Err(Error::Schema(format!(
            "{}: column {} is {:?}, vocabulary expects {:?}",
            path.display(),
            pos + 1,
            columns[pos],
            vocab.label(pos)
        )));
    }
    if columns.len() != vocab.len() {
        let first = if columns.len() > vocab.len() {
            format!("extra column {:?}", columns[vocab.len()])
        } else {
            format!("missing column {:?}", vocab.label(columns.len()))
        };
        return Err(Error::Schema(format!("{}: {first}", path.display())));
    }

    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (r, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() != vocab.len() + 1 {
            return Err(Error::Format {
                path: path.to_owned(),
                line: r + 2,
                message: format!("{} fields, expected {}", rec.len(), vocab.len() + 1),
            });
        }
        let video = rec[0].trim().to_owned();
        for (c, field) in rec.iter().skip(1).enumerate() {
            let x: f64 = field.trim().parse().map_err(|_| Error::Format {
                path: path.to_owned(),
                line: r + 2,
                message: format!("invalid number {field:?}"),
            })?;
            if !x.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite entry at video {video:?}, label {:?}",
                    vocab.label(c)
                )));
            }
            values.push(x);
        }
        ids.push(video);
    }
    ProbabilityMatrix::new(vocab, ids, values, renormalize)
}

fn load_zspm(path: &Path, vocab: &Vocabulary, renormalize: bool) -> Result<ProbabilityMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |message: String| Error::Format {
        path: path.to_owned(),
        line: 0,
        message,
    };
    binio::read_header(&mut r, MATRIX_MAGIC, MATRIX_VERSION).map_err(|e| bad(e.to_string()))?;
    let rows = binio::read_u64(&mut r).map_err(|e| Error::io(path, e))? as usize;
    let cols = binio::read_u64(&mut r).map_err(|e| Error::io(path, e))? as usize;
    if cols != vocab.len() {
        return Err(Error::Schema(format!(
            "{}: {cols} columns, vocabulary has {} labels",
            path.display(),
            vocab.len()
        )));
    }
    let values = binio::read_f32s(&mut r, rows * cols).map_err(|e| Error::io(path, e))?;
    if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite entry at row {}, label {:?}",
            pos / cols,
            vocab.label(pos % cols)
        )));
    }
    let mut ids = Vec::with_capacity(rows);
    for i in 0..rows {
        ids.push(binio::read_string(&mut r).map_err(|e| bad(format!("video id {i}: {e}")))?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(bad("trailing bytes after video ids".into()));
    }
    ProbabilityMatrix::new(vocab, ids, values, renormalize)
}

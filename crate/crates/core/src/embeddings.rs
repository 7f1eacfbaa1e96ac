//! Label embeddings: file loaders, phrase composition and cosine similarity.
//!
//! Labels are embedded by looking up the whole normalized phrase first and
//! falling back to the mean of its token vectors. Normalization lowercases,
//! splits on whitespace and underscores, and strips punctuation, so
//! `"Horse_Racing"` and `"horse racing"` resolve to the same key.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binio;
use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

pub const BINARY_TABLE_MAGIC: &[u8; 4] = b"ZSEB";
pub const BINARY_TABLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingFormat {
    Word2vecText,
    BinaryTable,
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word2vec_text" => Ok(Self::Word2vecText),
            "binary_table" => Ok(Self::BinaryTable),
            other => Err(Error::config(
                "embedding_format",
                format!("unknown format {other:?}"),
            )),
        }
    }
}

/// What to do with a label none of whose tokens have a vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    /// Store a zero vector and flag the label as out-of-vocabulary.
    Zero,
    #[default]
    Fail,
}

impl FromStr for OovPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "fail" => Ok(Self::Fail),
            other => Err(Error::config("oov_policy", format!("unknown policy {other:?}"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Vector kernels
// ---------------------------------------------------------------------------

/// Dot product with four independent accumulators.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, or `None` when either vector has zero norm.
pub fn try_cosine(u: &[f64], v: &[f64]) -> Option<f64> {
    let denom = norm(u) * norm(v);
    if denom == 0.0 {
        return None;
    }
    Some((dot(u, v) / denom).clamp(-1.0, 1.0))
}

/// Cosine similarity; a zero-norm argument yields 0.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    try_cosine(u, v).unwrap_or(0.0)
}

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

/// Lowercased tokens of a label, split on whitespace and `_`, with
/// punctuation removed. Tokens that end up empty are dropped.
pub fn tokenize(label: &str) -> Vec<String> {
    label
        .split(|c: char| c.is_whitespace() || c == '_')
        .map(|tok| {
            tok.chars()
                .filter(|c| !c.is_ascii_punctuation())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|tok| !tok.is_empty())
        .collect()
}

/// Normalized lookup key of a label or file token.
pub fn normalize_key(raw: &str) -> String {
    tokenize(raw).join(" ")
}

/// Raw token vectors keyed by normalized token.
#[derive(Debug, Clone, Default)]
pub struct TokenIndex {
    dim: usize,
    rows: HashMap<String, usize>,
    data: Vec<f64>,
}

impl TokenIndex {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: HashMap::new(),
            data: Vec::new(),
        }
    }

    /// Inserts a vector under the normalized form of `token`. The first
    /// insertion of a key wins; returns whether the vector was stored.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> bool {
        assert_eq!(vector.len(), self.dim, "token vector dimension");
        let key = normalize_key(token);
        if key.is_empty() || self.rows.contains_key(&key) {
            return false;
        }
        self.rows.insert(key, self.data.len() / self.dim.max(1));
        self.data.extend_from_slice(vector);
        true
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Vector stored under an already-normalized key.
    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.rows
            .get(key)
            .map(|&r| &self.data[r * self.dim..(r + 1) * self.dim])
    }
}

/// The vector for one label plus whether it had to be synthesized as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelEmbedding {
    pub vector: Vec<f64>,
    pub oov: bool,
}

/// Embeds a label: the whole-phrase vector when present, otherwise the
/// arithmetic mean of the vectors of its known tokens.
pub fn embed_label(label: &str, tokens: &TokenIndex, policy: OovPolicy) -> Result<LabelEmbedding> {
    let parts = tokenize(label);
    if parts.is_empty() {
        return Err(Error::Argument(format!("label {label:?} has no tokens")));
    }
    if let Some(v) = tokens.get(&parts.join(" ")) {
        return Ok(LabelEmbedding {
            vector: v.to_vec(),
            oov: false,
        });
    }

    let mut sum = vec![0.0; tokens.dim()];
    let mut found = 0usize;
    for part in &parts {
        if let Some(v) = tokens.get(part) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            found += 1;
        }
    }
    match (found, policy) {
        (0, OovPolicy::Fail) => Err(Error::MissingLabel {
            label: label.to_owned(),
        }),
        (0, OovPolicy::Zero) => Ok(LabelEmbedding {
            vector: sum,
            oov: true,
        }),
        (n, _) => {
            let n = n as f64;
            sum.iter_mut().for_each(|s| *s /= n);
            Ok(LabelEmbedding {
                vector: sum,
                oov: false,
            })
        }
    }
}

/// Every key that `embed_label` may look up for the labels of `vocab`.
fn lookup_keys(vocab: &Vocabulary) -> HashSet<String> {
    let mut keys = HashSet::new();
    for label in vocab.labels() {
        let parts = tokenize(label);
        keys.insert(parts.join(" "));
        keys.extend(parts);
    }
    keys
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

/// One vector per vocabulary label, with cached norms.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    dim: usize,
    data: Vec<f64>,
    norms: Vec<f64>,
    oov: Vec<bool>,
    tokens: TokenIndex,
}

impl EmbeddingTable {
    /// Builds a table from explicit per-label vectors. Zero vectors are
    /// flagged out-of-vocabulary.
    pub fn from_vectors(vocab: Vocabulary, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.len() != vocab.len() {
            return Err(Error::Schema(format!(
                "{} vectors for {} labels",
                vectors.len(),
                vocab.len()
            )));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        if dim == 0 && !vectors.is_empty() {
            return Err(Error::Argument("embedding dimension must be positive".into()));
        }
        let mut tokens = TokenIndex::new(dim);
        let mut table = Self::with_capacity(vocab, dim);
        for (id, v) in vectors.into_iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Schema(format!(
                    "label {:?} has {} components, expected {dim}",
                    table.vocab.label(id),
                    v.len()
                )));
            }
            if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite component {bad} for label {:?}",
                    table.vocab.label(id)
                )));
            }
            tokens.insert(table.vocab.label(id), &v);
            let oov = v.iter().all(|&x| x == 0.0);
            table.push(&v, oov);
        }
        table.tokens = tokens;
        Ok(table)
    }

    /// Embeds every label of `vocab` from a token index.
    pub fn from_tokens(vocab: Vocabulary, tokens: TokenIndex, policy: OovPolicy) -> Result<Self> {
        let mut table = Self::with_capacity(vocab, tokens.dim());
        for id in 0..table.vocab.len() {
            let emb = embed_label(table.vocab.label(id), &tokens, policy)?;
            if emb.oov {
                log::warn!("label {:?} is out of vocabulary, using a zero vector", table.vocab.label(id));
            }
            table.push(&emb.vector, emb.oov);
        }
        table.tokens = tokens;
        Ok(table)
    }

    fn with_capacity(vocab: Vocabulary, dim: usize) -> Self {
        let n = vocab.len();
        Self {
            vocab,
            dim,
            data: Vec::with_capacity(n * dim),
            norms: Vec::with_capacity(n),
            oov: Vec::with_capacity(n),
            tokens: TokenIndex::new(dim),
        }
    }

    fn push(&mut self, v: &[f64], oov: bool) {
        self.norms.push(norm(v));
        self.oov.push(oov);
        self.data.extend_from_slice(v);
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vector(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn norm(&self, id: usize) -> f64 {
        self.norms[id]
    }

    pub fn is_oov(&self, id: usize) -> bool {
        self.oov[id]
    }

    pub fn tokens(&self) -> &TokenIndex {
        &self.tokens
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1)).take(self.len())
    }

    /// A copy of this table with every nonzero vector scaled to unit norm.
    pub fn normalized(&self) -> Self {
        let mut out = Self::with_capacity(self.vocab.clone(), self.dim);
        for id in 0..self.len() {
            let n = self.norms[id];
            let v: Vec<f64> = if n > 0.0 {
                self.vector(id).iter().map(|x| x / n).collect()
            } else {
                self.vector(id).to_vec()
            };
            out.push(&v, self.oov[id]);
        }
        out.tokens = self.tokens.clone();
        out
    }

    /// Table restricted to the given label ids, in order.
    pub fn subset(&self, ids: &[usize]) -> Result<Self> {
        let mut out = Self::with_capacity(self.vocab.subset(ids)?, self.dim);
        for &id in ids {
            out.push(self.vector(id), self.oov[id]);
        }
        out.tokens = self.tokens.clone();
        Ok(out)
    }
}

/// Loads the vectors needed by `vocab` from an embedding file.
pub fn load_embedding_table(
    path: impl AsRef<Path>,
    format: EmbeddingFormat,
    vocab: Vocabulary,
    policy: OovPolicy,
) -> Result<EmbeddingTable> {
    let keys = lookup_keys(&vocab);
    let tokens = match format {
        EmbeddingFormat::Word2vecText => read_word2vec_text(path.as_ref(), Some(&keys))?,
        EmbeddingFormat::BinaryTable => read_binary_table(path.as_ref(), Some(&keys))?,
    };
    EmbeddingTable::from_tokens(vocab, tokens, policy)
}

/// Reads a word2vec text file. With a `filter`, only tokens whose normalized
/// key is in the set are kept.
pub fn read_word2vec_text(path: &Path, filter: Option<&HashSet<String>>) -> Result<TokenIndex> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut index: Option<TokenIndex> = None;
    let mut declared_dim = None;
    let mut values = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = lineno + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if lineno == 1 && fields.len() == 2 {
            if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                declared_dim = Some(d);
                continue;
            }
        }
        let format_err = |message: String| Error::Format {
            path: path.to_owned(),
            line: lineno,
            message,
        };
        let dim = fields.len() - 1;
        let expected = declared_dim.or(index.as_ref().map(TokenIndex::dim));
        match expected {
            Some(d) if d != dim => {
                return Err(format_err(format!("expected {d} components, found {dim}")));
            }
            _ if dim == 0 => return Err(format_err("token without components".into())),
            _ => {}
        }
        let index = index.get_or_insert_with(|| TokenIndex::new(dim));
        if let Some(keys) = filter {
            if !keys.contains(&normalize_key(fields[0])) {
                continue;
            }
        }
        values.clear();
        for f in &fields[1..] {
            let x: f64 = f
                .parse()
                .map_err(|_| format_err(format!("invalid number {f:?}")))?;
            if !x.is_finite() {
                return Err(format_err(format!("non-finite component {f:?}")));
            }
            values.push(x);
        }
        index.insert(fields[0], &values);
    }
    index
        .or_else(|| declared_dim.map(TokenIndex::new))
        .ok_or_else(|| Error::Format {
            path: path.to_owned(),
            line: 0,
            message: "empty embedding file".into(),
        })
}

pub fn write_word2vec_text<'a, I>(path: &Path, dim: usize, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    let rows: Vec<_> = rows.into_iter().collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", rows.len(), dim).map_err(io)?;
    for (token, v) in rows {
        if token.split_whitespace().count() != 1 {
            return Err(Error::Argument(format!(
                "token {token:?} cannot be written as a single word2vec field"
            )));
        }
        write!(w, "{token}").map_err(io)?;
        for x in v {
            write!(w, " {x}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a `ZSEB` binary table.
pub fn read_binary_table(path: &Path, filter: Option<&HashSet<String>>) -> Result<TokenIndex> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |message: String| Error::Format {
        path: path.to_owned(),
        line: 0,
        message,
    };
    binio::read_header(&mut r, BINARY_TABLE_MAGIC, BINARY_TABLE_VERSION)
        .map_err(|e| bad(e.to_string()))?;
    let count = binio::read_u64(&mut r).map_err(|e| Error::io(path, e))? as usize;
    let dim = binio::read_u64(&mut r).map_err(|e| Error::io(path, e))? as usize;
    if dim == 0 {
        return Err(bad("dimension must be positive".into()));
    }
    let payload = binio::read_f32s(&mut r, count * dim).map_err(|e| Error::io(path, e))?;
    let mut index = TokenIndex::new(dim);
    for row in 0..count {
        let label = binio::read_string(&mut r).map_err(|e| bad(format!("label {row}: {e}")))?;
        let v = &payload[row * dim..(row + 1) * dim];
        if let Some(bad_x) = v.iter().find(|x| !x.is_finite()) {
            return Err(bad(format!("non-finite component {bad_x} in row {row}")));
        }
        if filter.is_some_and(|keys| !keys.contains(&normalize_key(&label))) {
            continue;
        }
        index.insert(&label, v);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(bad("trailing bytes after label block".into()));
    }
    Ok(index)
}

pub fn write_binary_table<'a, I>(path: &Path, dim: usize, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    let rows: Vec<_> = rows.into_iter().collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    binio::write_header(&mut w, BINARY_TABLE_MAGIC, BINARY_TABLE_VERSION).map_err(io)?;
    binio::write_u64(&mut w, rows.len() as u64).map_err(io)?;
    binio::write_u64(&mut w, dim as u64).map_err(io)?;
    for (_, v) in &rows {
        if v.len() != dim {
            return Err(Error::Schema(format!("row has {} components, expected {dim}", v.len())));
        }
        binio::write_f32s(&mut w, v.iter().copied()).map_err(io)?;
    }
    for (label, _) in &rows {
        binio::write_string(&mut w, label).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes a table's label vectors in the given format.
pub fn save_embedding_table(table: &EmbeddingTable, path: &Path, format: EmbeddingFormat) -> Result<()> {
    let rows = table
        .vocab()
        .labels()
        .iter()
        .map(String::as_str)
        .zip(table.iter());
    match format {
        EmbeddingFormat::Word2vecText => write_word2vec_text(path, table.dim(), rows),
        EmbeddingFormat::BinaryTable => write_binary_table(path, table.dim(), rows),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::SourceKind;
    use proptest::prelude::*;

    fn index(entries: &[(&str, &[f64])]) -> TokenIndex {
        let mut idx = TokenIndex::new(entries[0].1.len());
        for (t, v) in entries {
            idx.insert(t, v);
        }
        idx
    }

    fn vocab(labels: &[&str]) -> Vocabulary {
        Vocabulary::new(SourceKind::Generic, labels.iter().copied()).unwrap()
    }

    #[test]
    fn loads_two_line_word2vec_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.vec");
        std::fs::write(&path, "a 1 0\nb 0 1\n").unwrap();
        let t = load_embedding_table(&path, EmbeddingFormat::Word2vecText, vocab(&["a", "b"]), OovPolicy::Fail)
            .unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.vector(0), [1.0, 0.0]);
        assert_eq!(t.vector(1), [0.0, 1.0]);
    }

    #[test]
    fn header_line_is_optional() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.vec");
        std::fs::write(&path, "2 3\nx 1 2 3\ny 4 5 6\n").unwrap();
        let idx = read_word2vec_text(&path, None).unwrap();
        assert_eq!(idx.dim(), 3);
        assert_eq!(idx.get("y"), Some(&[4.0, 5.0, 6.0][..]));
    }

    #[test]
    fn wrong_component_count_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.vec");
        std::fs::write(&path, "a 1 0\nb 0 1 2\n").unwrap();
        match read_word2vec_text(&path, None).unwrap_err() {
            Error::Format { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn phrase_label_is_mean_of_tokens() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.vec");
        std::fs::write(&path, "ice 1 0\nrink 0 1\n").unwrap();
        let t = load_embedding_table(&path, EmbeddingFormat::Word2vecText, vocab(&["ice rink"]), OovPolicy::Fail)
            .unwrap();
        assert_eq!(t.vector(0), [0.5, 0.5]);
    }

    #[test]
    fn fully_oov_label_follows_policy() {
        let idx = index(&[("known", &[1.0, 1.0])]);
        let zero = embed_label("qqzz xx", &idx, OovPolicy::Zero).unwrap();
        assert!(zero.oov);
        assert_eq!(zero.vector, [0.0, 0.0]);
        match embed_label("qqzz xx", &idx, OovPolicy::Fail).unwrap_err() {
            Error::MissingLabel { label } => assert_eq!(label, "qqzz xx"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn embed_label_examples() {
        let idx = index(&[
            ("swing", &[2.0, 4.0]),
            ("horse", &[1.0, 1.0]),
            ("racing", &[3.0, -1.0]),
        ]);
        assert_eq!(embed_label("swing", &idx, OovPolicy::Fail).unwrap().vector, [2.0, 4.0]);
        assert_eq!(
            embed_label("horse_racing", &idx, OovPolicy::Fail).unwrap().vector,
            [2.0, 0.0]
        );
        // unknown tokens inside a phrase are skipped
        assert_eq!(
            embed_label("Horse, zzz", &idx, OovPolicy::Fail).unwrap().vector,
            [1.0, 1.0]
        );
        assert!(matches!(
            embed_label("  ", &idx, OovPolicy::Zero),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn whole_phrase_vector_wins_over_tokens() {
        let idx = index(&[("ice", &[1.0, 0.0]), ("rink", &[0.0, 1.0]), ("ice_rink", &[7.0, 7.0])]);
        assert_eq!(embed_label("Ice Rink", &idx, OovPolicy::Fail).unwrap().vector, [7.0, 7.0]);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[3.0, 4.0], &[3.0, 4.0]), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(cosine(&[1.0, 0.0], &[-2.0, 0.0]), -1.0);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(try_cosine(&[0.0, 0.0], &[1.0, 0.0]), None);
    }

    #[test]
    fn binary_table_roundtrip_keeps_phrase_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.zseb");
        let rows: Vec<(&str, &[f64])> = vec![("ice rink", &[0.25, -1.5]), ("swing", &[3.0, 0.5])];
        write_binary_table(&path, 2, rows).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"ZSEB");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        let t = load_embedding_table(&path, EmbeddingFormat::BinaryTable, vocab(&["swing", "ice rink"]), OovPolicy::Fail)
            .unwrap();
        assert_eq!(t.vector(0), [3.0, 0.5]);
        assert_eq!(t.vector(1), [0.25, -1.5]);
    }

    #[test]
    fn truncated_binary_table_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.zseb");
        write_binary_table(&path, 2, vec![("a", &[1.0, 2.0][..])]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_binary_table(&path, None).is_err());
    }

    fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, d)
    }

    proptest! {
        #[test]
        fn self_cosine_is_one(u in vec_strategy(7)) {
            prop_assume!(norm(&u) > 1e-6);
            prop_assert!((cosine(&u, &u) - 1.0).abs() <= 1e-6);
        }

        #[test]
        fn cosine_is_scale_invariant_and_symmetric(u in vec_strategy(5), v in vec_strategy(5), alpha in 0.01f64..100.0) {
            let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
            prop_assert!((cosine(&scaled, &v) - cosine(&u, &v)).abs() <= 1e-6);
            prop_assert_eq!(cosine(&u, &v), cosine(&v, &u));
            let c = cosine(&u, &v);
            prop_assert!((-1.0..=1.0).contains(&c));
        }

        #[test]
        fn single_token_embedding_is_bit_exact(v in vec_strategy(6)) {
            let mut idx = TokenIndex::new(6);
            idx.insert("token", &v);
            let e = embed_label("token", &idx, OovPolicy::Fail).unwrap();
            prop_assert_eq!(e.vector, v);
        }
    }
}

//! Ordered label lists with stable integer ids.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Objects,
    Scenes,
    Actions,
    Generic,
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SourceKind::Objects => "objects",
            SourceKind::Scenes => "scenes",
            SourceKind::Actions => "actions",
            SourceKind::Generic => "generic",
        };
        f.write_str(name)
    }
}

/// Labels of one source. The id of a label is its position in the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    kind: SourceKind,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from labels, trimming each one. Empty or
    /// duplicate labels are rejected.
    pub fn new<I, S>(kind: SourceKind, labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Vec::new();
        let mut index = HashMap::new();
        for raw in labels {
            let label = raw.as_ref().trim();
            if label.is_empty() {
                return Err(Error::Argument(format!("empty label in {kind} vocabulary")));
            }
            if index.insert(label.to_owned(), out.len()).is_some() {
                return Err(Error::Argument(format!(
                    "duplicate label {label:?} in {kind} vocabulary"
                )));
            }
            out.push(label.to_owned());
        }
        Ok(Self {
            kind,
            labels: out,
            index,
        })
    }

    /// Reads one label per line. Blank lines and `#` comments are skipped.
    pub fn load(path: impl AsRef<Path>, kind: SourceKind) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(
            kind,
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for label in &self.labels {
            text.push_str(label);
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label.trim()).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// A vocabulary holding the given ids of `self`, in the given order.
    pub fn subset(&self, ids: &[usize]) -> Result<Self> {
        Self::new(self.kind, ids.iter().map(|&i| self.labels[i].as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_follow_line_order_and_skip_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        fs::write(&path, "# header\nswing\n\n ice rink \nplayground\n").unwrap();
        let v = Vocabulary::load(&path, SourceKind::Scenes).unwrap();
        assert_eq!(v.labels(), ["swing", "ice rink", "playground"]);
        assert_eq!(v.id("ice rink"), Some(1));
        assert_eq!(v.kind(), SourceKind::Scenes);
    }

    #[test]
    fn duplicates_after_trim_are_rejected() {
        let err = Vocabulary::new(SourceKind::Objects, ["dog", " dog"]).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
        // case-sensitive
        assert!(Vocabulary::new(SourceKind::Objects, ["Dog", "dog"]).is_ok());
    }
}

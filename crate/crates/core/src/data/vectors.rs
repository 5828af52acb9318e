use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::example::Example;
use crate::error::{Error, Result};
use crate::Scalar;

/// Width of the static word vectors used by default.
pub const WORD_DIM: usize = 300;
/// Width of the contextual vectors used by default.
pub const CONTEXTUAL_DIM: usize = 1024;

/// Static word vectors keyed by surface form.
#[derive(Debug, Clone)]
pub struct WordVectors<T: Scalar> {
    dim: usize,
    vectors: HashMap<String, Vec<T>>,
}

impl<T: Scalar> WordVectors<T> {
    pub fn new(dim: usize) -> Self {
        WordVectors {
            dim,
            vectors: HashMap::new(),
        }
    }

    /// Inserts unless the word is already present (first entry wins).
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<T>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                op: "word vector",
                left: vec![self.dim],
                right: vec![vector.len()],
            });
        }
        let word = word.into();
        if self.vectors.contains_key(&word) {
            return Ok(false);
        }
        self.vectors.insert(word, vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[T]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

/// Reads a whitespace-separated `word f1 ... f_dim` text file without header.
///
/// With `permissive`, lines with the wrong number of values are skipped with a
/// warning instead of failing. When `keep` is given, only those words are
/// retained, which keeps memory bounded for very large vector files.
pub fn load_word_vectors<T: Scalar>(
    path: impl AsRef<Path>,
    dim: usize,
    permissive: bool,
    keep: Option<&HashSet<String>>,
) -> Result<WordVectors<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = WordVectors::new(dim);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let word = fields.next().expect("nonblank line has a field");
        if keep.is_some_and(|k| !k.contains(word)) {
            continue;
        }
        let values: std::result::Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
        let problem = match &values {
            Err(e) => Some(format!("bad float: {e}")),
            Ok(v) if v.len() != dim => Some(format!("expected {dim} values, found {}", v.len())),
            Ok(_) => None,
        };
        if let Some(message) = problem {
            if permissive {
                log::warn!("{}:{line_no}: skipping '{word}': {message}", path.display());
                continue;
            }
            return Err(Error::parse(path, line_no, message));
        }
        let vector = values.expect("checked above").into_iter().map(T::from_f64_lossy).collect();
        out.insert(word, vector)?;
    }
    Ok(out)
}

/// Per-sentence contextual vectors keyed by sentence id.
#[derive(Debug, Clone)]
pub struct ContextualVectors<T: Scalar> {
    dim: usize,
    records: HashMap<String, Vec<T>>,
}

impl<T: Scalar> ContextualVectors<T> {
    pub fn new(dim: usize) -> Self {
        ContextualVectors {
            dim,
            records: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Adds a row-major `[n_tokens × dim]` matrix; duplicate ids are rejected.
    pub fn insert(&mut self, id: impl Into<String>, rows: Vec<Vec<T>>) -> Result<()> {
        let id = id.into();
        if let Some(bad) = rows.iter().find(|r| r.len() != self.dim) {
            return Err(Error::Dimension {
                op: "contextual row",
                left: vec![self.dim],
                right: vec![bad.len()],
            });
        }
        if self.records.contains_key(&id) {
            return Err(Error::Domain(format!("duplicate contextual record '{id}'")));
        }
        self.records.insert(id, rows.into_iter().flatten().collect());
        Ok(())
    }

    /// Row-major matrix for a sentence, and its row count.
    pub fn get(&self, id: &str) -> Option<(&[T], usize)> {
        self.records.get(id).map(|m| (m.as_slice(), m.len() / self.dim))
    }
}

#[derive(Deserialize)]
struct ContextualRecord {
    id: String,
    vectors: Vec<Vec<f64>>,
}

/// Reads contextual-vector JSONL: `{"id": str, "vectors": [[f × dim] × n]}`.
pub fn load_contextual<T: Scalar>(path: impl AsRef<Path>, dim: usize) -> Result<ContextualVectors<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = ContextualVectors::new(dim);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ContextualRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if let Some((r, row)) = record.vectors.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::parse(
                path,
                line_no,
                format!("record '{}' row {r} has width {}, expected {dim}", record.id, row.len()),
            ));
        }
        let rows = record
            .vectors
            .into_iter()
            .map(|r| r.into_iter().map(T::from_f64_lossy).collect())
            .collect();
        out.insert(record.id, rows)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
    }
    Ok(out)
}

/// Static and contextual vectors used to assemble token inputs.
///
/// Word lookup tries the exact form, then its lowercase form, then falls back
/// to zeros. With contextual vectors disabled (or none loaded) every
/// contextual row is zero.
#[derive(Debug, Clone)]
pub struct EmbeddingStore<T: Scalar> {
    words: WordVectors<T>,
    contextual: Option<ContextualVectors<T>>,
    contextual_dim: usize,
    contextual_enabled: bool,
}

impl<T: Scalar> EmbeddingStore<T> {
    pub fn new(words: WordVectors<T>, contextual: Option<ContextualVectors<T>>, contextual_dim: usize) -> Result<Self> {
        if let Some(c) = &contextual {
            if c.dim() != contextual_dim {
                return Err(Error::Dimension {
                    op: "contextual store",
                    left: vec![contextual_dim],
                    right: vec![c.dim()],
                });
            }
        }
        let contextual_enabled = contextual.is_some();
        Ok(EmbeddingStore {
            words,
            contextual,
            contextual_dim,
            contextual_enabled,
        })
    }

    /// Returns the store with contextual lookups switched on or off.
    /// Enabling has no effect when no contextual vectors were loaded.
    pub fn with_contextual_enabled(mut self, enabled: bool) -> Self {
        self.contextual_enabled = enabled && self.contextual.is_some();
        self
    }

    pub fn contextual_enabled(&self) -> bool {
        self.contextual_enabled
    }

    pub fn word_dim(&self) -> usize {
        self.words.dim()
    }

    pub fn contextual_dim(&self) -> usize {
        self.contextual_dim
    }

    pub fn input_dim(&self) -> usize {
        self.word_dim() + self.contextual_dim
    }

    pub fn words(&self) -> &WordVectors<T> {
        &self.words
    }

    pub fn word_vector(&self, token: &str) -> Option<&[T]> {
        self.words.get(token).or_else(|| {
            let lower = token.to_lowercase();
            if lower == token {
                None
            } else {
                self.words.get(&lower)
            }
        })
    }

    /// The sentence's contextual matrix, or `None` when contextual vectors are
    /// disabled. A missing record or a row count that differs from the token
    /// count is an alignment error.
    pub fn contextual_rows(&self, example: &Example) -> Result<Option<&[T]>> {
        if !self.contextual_enabled {
            return Ok(None);
        }
        let records = self.contextual.as_ref().expect("enabled implies loaded");
        match records.get(&example.id) {
            Some((m, rows)) if rows == example.len() => Ok(Some(m)),
            found => Err(Error::Alignment {
                id: example.id.clone(),
                expected: example.len(),
                found: found.map_or(0, |(_, r)| r),
            }),
        }
    }

    /// Contextual matrix with the zero fallback applied.
    pub fn contextual_matrix(&self, example: &Example) -> Result<Vec<T>> {
        Ok(match self.contextual_rows(example)? {
            Some(m) => m.to_vec(),
            None => vec![T::zero(); example.len() * self.contextual_dim],
        })
    }

    /// Checks every example up front so training never fails half-way.
    pub fn check_alignment(&self, examples: &[Example]) -> Result<()> {
        examples.iter().try_for_each(|e| self.contextual_rows(e).map(|_| ()))
    }
}

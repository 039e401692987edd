//! Embedding table codec.
//!
//! Texts are encoded token by token into a [`VectorSequence`], mixed in the
//! flat (concatenated) space, split back into per-token chunks and decoded to
//! the nearest table token.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Vocabulary to fixed-dimension vector map.
///
/// Tokens are stored in lexicographic order, so "lowest index" and
/// "lexicographically smallest token" are the same tie-break.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    data: Vec<f64>,
    norms: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidTable("dimension must be positive".into()));
        }
        let mut entries: Vec<(String, Vec<f64>)> = entries.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if entries.len() < 2 {
            return Err(Error::InvalidTable("a table needs at least 2 entries".into()));
        }
        let mut tokens = Vec::with_capacity(entries.len());
        let mut data = Vec::with_capacity(entries.len() * dim);
        let mut norms = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (token, vector) in entries {
            if vector.len() != dim {
                return Err(Error::InvalidTable(format!(
                    "token {token:?} has {} components, expected {dim}",
                    vector.len()
                )));
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidTable(format!("token {token:?} has a non-finite component")));
            }
            if index.insert(token.clone(), tokens.len()).is_some() {
                return Err(Error::InvalidTable(format!("duplicate token {token:?}")));
            }
            norms.push(norm(&vector));
            data.extend_from_slice(&vector);
            tokens.push(token);
        }
        Ok(EmbeddingTable {
            dim,
            tokens,
            data,
            norms,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn vector_at(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.vector_at(i))
    }

    /// Index of the entry closest to `query` among those `allowed`.
    ///
    /// Closeness is cosine similarity; a zero query falls back to Euclidean
    /// distance. Ties go to the lowest index. Returns `None` only when no
    /// entry is allowed.
    pub fn nearest_index(&self, query: &[f64], allowed: impl Fn(usize) -> bool) -> Option<usize> {
        debug_assert_eq!(query.len(), self.dim);
        let qnorm = norm(query);
        let mut best: Option<(usize, f64)> = None;
        for i in (0..self.len()).filter(|&i| allowed(i)) {
            let v = self.vector_at(i);
            // Higher score is better in both branches.
            let score = if qnorm > 0.0 {
                if self.norms[i] > 0.0 {
                    dot(query, v) / (qnorm * self.norms[i])
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                -squared_distance(query, v)
            };
            match best {
                Some((_, s)) if score <= s => {}
                _ => best = Some((i, score)),
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Reads the common word-vector text format: a `<vocab_size> <dimension>`
/// header followed by `<token> v1 ... vd` lines.
pub fn load_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();

    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::parse(path, 1, "empty embedding file")),
    };
    let mut fields = header.split_whitespace();
    let mut header_num = || -> Result<usize> {
        fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "header must be \"<vocab_size> <dimension>\""))
    };
    let vocab_size = header_num()?;
    let dim = header_num()?;

    let mut entries = Vec::with_capacity(vocab_size);
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ').filter(|p| !p.is_empty());
        let token = parts.next().unwrap_or_default().to_string();
        let vector = parts
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, lineno, format!("bad component for {token:?}: {e}")))?;
        if vector.len() != dim {
            return Err(Error::parse(
                path,
                lineno,
                format!("token {token:?} has {} components, expected {dim}", vector.len()),
            ));
        }
        entries.push((token, vector));
    }
    if entries.len() != vocab_size {
        return Err(Error::parse(
            path,
            1,
            format!("header declares {vocab_size} entries, found {}", entries.len()),
        ));
    }
    EmbeddingTable::new(dim, entries)
}

/// Per-token embeddings of one text, stored contiguously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSequence {
    dim: usize,
    data: Vec<f64>,
}

impl VectorSequence {
    pub fn new(dim: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(dim * vectors.len());
        for v in vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            data.extend_from_slice(v);
        }
        split_concat(&data, dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of token vectors.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vectors(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    /// The flat concatenation of all token vectors.
    pub fn concat(&self) -> &[f64] {
        &self.data
    }

    /// Appends zero vectors up to `len` tokens. Never truncates.
    pub fn padded(&self, len: usize) -> VectorSequence {
        let mut data = self.data.clone();
        if len > self.len() {
            data.resize(len * self.dim, 0.0);
        }
        VectorSequence { dim: self.dim, data }
    }

    pub fn mean_pool(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for v in self.vectors() {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        let k = self.len() as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        mean
    }
}

/// Splits a flat vector into `flat.len() / dim` contiguous chunks.
pub fn split_concat(flat: &[f64], dim: usize) -> Result<VectorSequence> {
    if dim == 0 || flat.is_empty() || !flat.len().is_multiple_of(dim) {
        return Err(Error::InvalidInput(format!(
            "a flat vector of length {} cannot be split into {dim}-dimensional chunks",
            flat.len()
        )));
    }
    Ok(VectorSequence {
        dim,
        data: flat.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OovPolicy {
    #[default]
    Error,
    ZeroVector,
}

pub fn encode(tokens: &[String], table: &EmbeddingTable, oov: OovPolicy) -> Result<VectorSequence> {
    if tokens.is_empty() {
        return Err(Error::InvalidInput("cannot encode an empty token list".into()));
    }
    let dim = table.dim();
    let mut data = Vec::with_capacity(tokens.len() * dim);
    for token in tokens {
        match (table.vector(token), oov) {
            (Some(v), _) => data.extend_from_slice(v),
            (None, OovPolicy::ZeroVector) => data.extend(std::iter::repeat_n(0.0, dim)),
            (None, OovPolicy::Error) => return Err(Error::OutOfVocabulary(token.clone())),
        }
    }
    Ok(VectorSequence { dim, data })
}

/// Maps every vector to its nearest table token.
pub fn decode(seq: &VectorSequence, table: &EmbeddingTable) -> Result<Vec<String>> {
    check_dim(table.dim(), seq.dim())?;
    Ok(seq
        .vectors()
        .map(|v| {
            let idx = table.nearest_index(v, |_| true).expect("table has entries");
            table.token(idx).to_string()
        })
        .collect())
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

fn cosine_or_neg_inf(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na > 0.0 && nb > 0.0 {
        dot(a, b) / (na * nb)
    } else {
        f64::NEG_INFINITY
    }
}

/// Index of the pool sequence whose mean-pooled vector has the highest cosine
/// similarity to the query's. Lowest index wins ties; zero means never win
/// against a nonzero one.
pub fn nearest_neighbor(query: &VectorSequence, pool: &[VectorSequence]) -> Result<usize> {
    nearest_neighbor_where(query, pool, |_| true)?
        .ok_or_else(|| Error::InvalidInput("nearest-neighbor pool is empty".into()))
}

pub(crate) fn nearest_neighbor_where(
    query: &VectorSequence,
    pool: &[VectorSequence],
    allowed: impl Fn(usize) -> bool,
) -> Result<Option<usize>> {
    for item in pool {
        check_dim(query.dim(), item.dim())?;
    }
    let q = query.mean_pool();
    let mut best: Option<(usize, f64)> = None;
    for (i, item) in pool.iter().enumerate().filter(|(i, _)| allowed(*i)) {
        let score = cosine_or_neg_inf(&q, &item.mean_pool());
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((i, score)),
        }
    }
    Ok(best.map(|(i, _)| i))
}

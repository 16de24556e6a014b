//! Word embedding table with partial trainability: most vectors stay fixed,
//! only a designated set of rows (the most frequent question words) receives
//! gradients. Out-of-vocabulary words share a single non-trainable unknown
//! vector at row 0.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const UNK_ROW: usize = 0;

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    /// words[i] owns row i + 1; row 0 is the unknown vector.
    words: Vec<String>,
    lookup: HashMap<String, usize>,
    vectors: Array2<f64>,
    /// Sorted row ids that receive gradients. Never contains `UNK_ROW`.
    trainable: Vec<usize>,
}

impl EmbeddingTable {
    /// Random table over `words`, uniform in ±1/sqrt(dim). Duplicate words
    /// keep their first occurrence.
    pub fn random(words: &[String], dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingTable {
        let mut unique = Vec::new();
        let mut lookup = HashMap::new();
        for w in words {
            if !lookup.contains_key(w) {
                lookup.insert(w.clone(), unique.len() + 1);
                unique.push(w.clone());
            }
        }
        let bound = 1.0 / (dim as f64).sqrt();
        let mut vectors = Array2::zeros((unique.len() + 1, dim));
        for mut row in vectors.rows_mut().into_iter().skip(1) {
            for v in row.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        EmbeddingTable {
            dim,
            words: unique,
            lookup,
            vectors,
            trainable: Vec::new(),
        }
    }

    /// Load a text embedding file: one token per line, token then `dim`
    /// floats, space-separated. Lines with the wrong arity are an error.
    pub fn load_text(path: impl AsRef<Path>, dim: usize) -> Result<EmbeddingTable> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);

        let mut words = Vec::new();
        let mut lookup = HashMap::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line_no, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().unwrap().to_string();
            let values: Vec<f64> = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| {
                    Error::format(path, format!("line {}: bad float: {e}", line_no + 1))
                })?;
            if values.len() != dim {
                return Err(Error::format(
                    path,
                    format!(
                        "line {}: expected {dim} values, found {}",
                        line_no + 1,
                        values.len()
                    ),
                ));
            }
            if lookup.contains_key(&word) {
                continue;
            }
            lookup.insert(word.clone(), words.len() + 1);
            words.push(word);
            rows.push(values);
        }

        let mut vectors = Array2::zeros((rows.len() + 1, dim));
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                vectors[(i + 1, j)] = *v;
            }
        }
        Ok(EmbeddingTable {
            dim,
            words,
            lookup,
            vectors,
            trainable: Vec::new(),
        })
    }

    pub(crate) fn from_parts(
        dim: usize,
        words: Vec<String>,
        vectors: Array2<f64>,
        trainable: Vec<usize>,
    ) -> EmbeddingTable {
        let lookup = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i + 1))
            .collect();
        EmbeddingTable {
            dim,
            words,
            lookup,
            vectors,
            trainable,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_len(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn trainable_rows(&self) -> &[usize] {
        &self.trainable
    }

    /// Row id for a word: exact surface, then lowercase, then the unknown
    /// row.
    pub fn row_of(&self, word: &str) -> usize {
        if let Some(&row) = self.lookup.get(word) {
            return row;
        }
        let lower = word.to_lowercase();
        self.lookup.get(&lower).copied().unwrap_or(UNK_ROW)
    }

    pub fn vector(&self, row: usize) -> ndarray::ArrayView1<'_, f64> {
        self.vectors.row(row)
    }

    /// Mark the rows of `words` trainable, ignoring unknowns. The unknown
    /// vector itself is never trainable.
    pub fn set_trainable(&mut self, words: &[String]) {
        let mut rows: Vec<usize> = words
            .iter()
            .map(|w| self.row_of(w))
            .filter(|&r| r != UNK_ROW)
            .collect();
        rows.sort_unstable();
        rows.dedup();
        self.trainable = rows;
    }

    pub(crate) fn trainable_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.trainable.len() * self.dim);
        for &row in &self.trainable {
            out.extend(self.vectors.row(row).iter());
        }
        out
    }

    pub(crate) fn set_trainable_flat(&mut self, flat: &[f64]) {
        debug_assert_eq!(flat.len(), self.trainable.len() * self.dim);
        let rows = self.trainable.clone();
        for (k, &row) in rows.iter().enumerate() {
            for (j, v) in self.vectors.row_mut(row).iter_mut().enumerate() {
                *v = flat[k * self.dim + j];
            }
        }
    }
}

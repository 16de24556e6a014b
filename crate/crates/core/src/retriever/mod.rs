//! Hashed unigram+bigram TF-IDF retrieval: index construction, query
//! vectorization and top-k scoring.

mod hash;
mod io;

pub use hash::{hash_feature, murmur3_x86_32};

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::DocStore;
use crate::error::{Error, Result};
use crate::textproc::{ngrams, normalize_for_retrieval};

pub const DEFAULT_HASH_BITS: u32 = 24;
pub const DEFAULT_SEED: u32 = 0;

/// Which n-grams feed the index. Bigrams always ride alongside unigrams; the
/// unigram-only mode exists for ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgramMode {
    Unigrams,
    UnigramsAndBigrams,
}

impl NgramMode {
    pub(crate) fn code(self) -> u32 {
        match self {
            NgramMode::Unigrams => 1,
            NgramMode::UnigramsAndBigrams => 2,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(NgramMode::Unigrams),
            2 => Some(NgramMode::UnigramsAndBigrams),
            _ => None,
        }
    }
}

/// N-grams of `text` under retrieval normalization and the given mode.
pub fn grams_of(text: &str, mode: NgramMode) -> Vec<String> {
    let tokens = normalize_for_retrieval(text);
    let mut grams = ngrams(&tokens, 1).expect("n=1 is valid");
    if mode == NgramMode::UnigramsAndBigrams {
        grams.extend(ngrams(&tokens, 2).expect("n=2 is valid"));
    }
    grams
}

fn hashed_counts_of(text: &str, seed: u32, hash_bits: u32, mode: NgramMode) -> BTreeMap<u32, u32> {
    let mut counts = BTreeMap::new();
    for gram in grams_of(text, mode) {
        let bin = hash_feature(&gram, seed, hash_bits);
        *counts.entry(bin).or_insert(0) += 1;
    }
    counts
}

/// Sparse TF-IDF vector: strictly increasing bin ids with finite,
/// non-negative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Dot product of two sorted sparse vectors.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let mut sum = 0.0;
        let (mut i, mut j) = (0usize, 0usize);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

/// Hashed-bigram sparse term-document matrix with per-bin document
/// frequencies. Rows store raw counts; TF-IDF weights are derived at query
/// time.
pub struct TfidfIndex {
    pub(crate) hash_bits: u32,
    pub(crate) seed: u32,
    pub(crate) mode: NgramMode,
    /// CSR over documents: row r covers indices/counts in
    /// `indptr[r]..indptr[r+1]`, bin ids ascending within a row.
    pub(crate) indptr: Vec<u64>,
    pub(crate) indices: Vec<u32>,
    pub(crate) counts: Vec<u32>,
    pub(crate) doc_ids: Vec<String>,
    /// Per-bin document frequency, sparse, bin ascending.
    pub(crate) doc_freq: Vec<(u32, u32)>,
    /// Inverted postings bin -> (row, count), rebuilt on load; not serialized.
    postings: BTreeMap<u32, Vec<(u32, u32)>>,
}

impl TfidfIndex {
    pub fn num_bins(&self) -> u64 {
        1u64 << self.hash_bits
    }

    pub fn hash_bits(&self) -> u32 {
        self.hash_bits
    }

    pub fn seed(&self) -> u32 {
        self.seed
    }

    pub fn mode(&self) -> NgramMode {
        self.mode
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Document frequency of a bin.
    pub fn doc_freq(&self, bin: u32) -> u32 {
        match self.doc_freq.binary_search_by_key(&bin, |(b, _)| *b) {
            Ok(i) => self.doc_freq[i].1,
            Err(_) => 0,
        }
    }

    /// BM25-style idf, clamped at zero: `max(0, ln((N - n_t + 0.5) / (n_t + 0.5)))`.
    pub fn idf(&self, bin: u32) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.doc_freq(bin) as f64;
        ((n - df + 0.5) / (df + 0.5)).ln().max(0.0)
    }

    /// N-grams of `text` under this index's normalization and mode.
    pub fn grams(&self, text: &str) -> Vec<String> {
        grams_of(text, self.mode)
    }

    /// Hashed term-frequency counts of `text`, bin ascending.
    pub fn hashed_counts(&self, text: &str) -> BTreeMap<u32, u32> {
        hashed_counts_of(text, self.seed, self.hash_bits, self.mode)
    }

    /// TF-IDF vector of arbitrary text against this index:
    /// `weight = ln(1 + tf) * idf`, zero-weight bins omitted.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (bin, tf) in self.hashed_counts(text) {
            let idf = self.idf(bin);
            if idf <= 0.0 {
                continue;
            }
            let w = (1.0 + tf as f64).ln() * idf;
            if w > 0.0 {
                indices.push(bin);
                values.push(w);
            }
        }
        SparseVector { indices, values }
    }

    /// TF-IDF row vector of a stored document.
    pub fn document_vector(&self, row: usize) -> SparseVector {
        let lo = self.indptr[row] as usize;
        let hi = self.indptr[row + 1] as usize;
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for k in lo..hi {
            let bin = self.indices[k];
            let idf = self.idf(bin);
            if idf <= 0.0 {
                continue;
            }
            indices.push(bin);
            values.push((1.0 + self.counts[k] as f64).ln() * idf);
        }
        SparseVector { indices, values }
    }

    /// Top-k documents by dot product of TF-IDF query and document vectors.
    /// Sorted by score descending, ties by ascending doc id; zero-score
    /// documents excluded.
    pub fn top_k(&self, question: &str, k: usize) -> Vec<(String, f64)> {
        if k == 0 {
            return Vec::new();
        }
        let mut scores: BTreeMap<u32, f64> = BTreeMap::new();
        for (bin, tf) in self.hashed_counts(question) {
            let idf = self.idf(bin);
            if idf <= 0.0 {
                continue;
            }
            let q_w = (1.0 + tf as f64).ln() * idf;
            if let Some(postings) = self.postings.get(&bin) {
                for &(row, count) in postings {
                    let d_w = (1.0 + count as f64).ln() * idf;
                    *scores.entry(row).or_insert(0.0) += q_w * d_w;
                }
            }
        }
        let mut ranked: Vec<(String, f64)> = scores
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(row, s)| (self.doc_ids[row as usize].clone(), s))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }

    /// Recount document frequencies from the CSR rows. Equals `doc_freq` on
    /// a well-formed index.
    pub fn audit_doc_freq(&self) -> Vec<(u32, u32)> {
        let mut df: BTreeMap<u32, u32> = BTreeMap::new();
        for row in 0..self.num_docs() {
            let lo = self.indptr[row] as usize;
            let hi = self.indptr[row + 1] as usize;
            for k in lo..hi {
                if self.counts[k] > 0 {
                    *df.entry(self.indices[k]).or_insert(0) += 1;
                }
            }
        }
        df.into_iter().collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::save(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TfidfIndex> {
        io::load(path.as_ref())
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn finalize(
        hash_bits: u32,
        seed: u32,
        mode: NgramMode,
        indptr: Vec<u64>,
        indices: Vec<u32>,
        counts: Vec<u32>,
        doc_ids: Vec<String>,
        doc_freq: Vec<(u32, u32)>,
    ) -> TfidfIndex {
        let mut postings: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
        for row in 0..doc_ids.len() {
            for k in indptr[row] as usize..indptr[row + 1] as usize {
                postings
                    .entry(indices[k])
                    .or_default()
                    .push((row as u32, counts[k]));
            }
        }
        TfidfIndex {
            hash_bits,
            seed,
            mode,
            indptr,
            indices,
            counts,
            doc_ids,
            doc_freq,
            postings,
        }
    }
}

/// Options for [`build_index`].
#[derive(Debug, Clone, Copy)]
pub struct IndexOptions {
    pub hash_bits: u32,
    pub seed: u32,
    pub mode: NgramMode,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions {
            hash_bits: DEFAULT_HASH_BITS,
            seed: DEFAULT_SEED,
            mode: NgramMode::UnigramsAndBigrams,
        }
    }
}

/// Build a TF-IDF index over every document in `store`, indexing
/// `title + " " + text`. Deterministic: rebuilding on the same store yields
/// an identical serialized index.
pub fn build_index(store: &DocStore, opts: IndexOptions) -> Result<TfidfIndex> {
    if store.is_empty() {
        return Err(Error::Index("cannot index an empty store".into()));
    }
    if opts.hash_bits < 1 || opts.hash_bits > 32 {
        return Err(Error::InvalidArgument(format!(
            "hash_bits must be in 1..=32, got {}",
            opts.hash_bits
        )));
    }

    let mut indptr: Vec<u64> = vec![0];
    let mut indices: Vec<u32> = Vec::new();
    let mut counts: Vec<u32> = Vec::new();
    let mut doc_ids: Vec<String> = Vec::new();
    let mut doc_freq: BTreeMap<u32, u32> = BTreeMap::new();

    for doc in store.iter() {
        let doc = doc?;
        let text = format!("{} {}", doc.title, doc.text);
        let row = hashed_counts_of(&text, opts.seed, opts.hash_bits, opts.mode);
        for (&bin, &count) in &row {
            indices.push(bin);
            counts.push(count);
            *doc_freq.entry(bin).or_insert(0) += 1;
        }
        indptr.push(indices.len() as u64);
        doc_ids.push(doc.id);
    }

    Ok(TfidfIndex::finalize(
        opts.hash_bits,
        opts.seed,
        opts.mode,
        indptr,
        indices,
        counts,
        doc_ids,
        doc_freq.into_iter().collect(),
    ))
}

//! Per-token paragraph feature vectors: word embedding, exact-match bits,
//! token features (POS/NER one-hots and normalized term frequency) and the
//! aligned question embedding.

use std::collections::{HashMap, HashSet};

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingTable;
use super::layers::{align_attention, AlignCache, DenseLayer};
use crate::error::{Error, Result};
use crate::textproc::TokenizedText;

/// Which feature blocks are active and how wide each one is. Column order:
/// embedding, exact-match (3), POS one-hot, NER one-hot, TF, aligned
/// question embedding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub dim: usize,
    pub exact_match: bool,
    pub token_features: bool,
    pub align: bool,
    /// When false the lemma exact-match bit stays 0 (the column remains).
    pub use_lemma: bool,
    pub pos_tags: Vec<String>,
    pub ner_tags: Vec<String>,
}

impl FeatureLayout {
    pub fn width(&self) -> usize {
        let mut w = self.dim;
        if self.exact_match {
            w += 3;
        }
        if self.token_features {
            w += self.pos_tags.len() + self.ner_tags.len() + 1;
        }
        if self.align {
            w += self.dim;
        }
        w
    }
}

/// Feature matrix for one paragraph against one question, plus the align
/// attention cache needed for backpropagation.
pub struct ParagraphFeatures {
    /// (m, width)
    pub rows: Array2<f64>,
    pub align_cache: Option<AlignCache>,
}

/// Build the feature rows. `para_emb`/`q_emb` are the (possibly
/// dropout-masked) embedding matrices of the paragraph and question tokens.
pub fn featurize(
    paragraph: &TokenizedText,
    question: &TokenizedText,
    para_emb: &Array2<f64>,
    q_emb: &Array2<f64>,
    align: &DenseLayer,
    layout: &FeatureLayout,
) -> Result<ParagraphFeatures> {
    let m = paragraph.tokens.len();
    let d = layout.dim;
    let mut rows = Array2::zeros((m, layout.width()));

    rows.slice_mut(s![.., ..d]).assign(para_emb);
    let mut col = d;

    if layout.exact_match {
        let q_orig: HashSet<&str> = question.tokens.iter().map(|t| t.surface.as_str()).collect();
        let q_lower: HashSet<&str> = question.tokens.iter().map(|t| t.lower.as_str()).collect();
        let q_lemma: HashSet<&str> = question
            .tokens
            .iter()
            .filter_map(|t| t.lemma.as_deref())
            .collect();
        for (i, tok) in paragraph.tokens.iter().enumerate() {
            if q_orig.contains(tok.surface.as_str()) {
                rows[(i, col)] = 1.0;
            }
            if q_lower.contains(tok.lower.as_str()) {
                rows[(i, col + 1)] = 1.0;
            }
            if layout.use_lemma {
                if let Some(lemma) = tok.lemma.as_deref() {
                    if q_lemma.contains(lemma) {
                        rows[(i, col + 2)] = 1.0;
                    }
                }
            }
        }
        col += 3;
    }

    if layout.token_features {
        let pos_index: HashMap<&str, usize> = layout
            .pos_tags
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let ner_index: HashMap<&str, usize> = layout
            .ner_tags
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let mut tf: HashMap<&str, f64> = HashMap::new();
        for tok in &paragraph.tokens {
            *tf.entry(tok.lower.as_str()).or_insert(0.0) += 1.0;
        }
        let pos_cols = layout.pos_tags.len();
        let ner_cols = layout.ner_tags.len();
        for (i, tok) in paragraph.tokens.iter().enumerate() {
            let pos = tok.pos.as_deref().ok_or_else(|| {
                Error::Config(format!(
                    "token features enabled but token {i} ({:?}) has no POS tag",
                    tok.surface
                ))
            })?;
            if let Some(&p) = pos_index.get(pos) {
                rows[(i, col + p)] = 1.0;
            }
            if let Some(ner) = tok.ner.as_deref() {
                if let Some(&n) = ner_index.get(ner) {
                    rows[(i, col + pos_cols + n)] = 1.0;
                }
            }
            rows[(i, col + pos_cols + ner_cols)] = tf[tok.lower.as_str()] / m as f64;
        }
        col += pos_cols + ner_cols + 1;
    }

    let align_cache = if layout.align {
        let (f_align, cache) = align_attention(para_emb, q_emb, align)?;
        rows.slice_mut(s![.., col..col + d]).assign(&f_align);
        Some(cache)
    } else {
        None
    };

    Ok(ParagraphFeatures { rows, align_cache })
}

/// Column range of the align block (only meaningful when `layout.align`).
pub fn align_columns(layout: &FeatureLayout) -> std::ops::Range<usize> {
    let end = layout.width();
    end - layout.dim..end
}

/// Embedding matrix for a token sequence.
pub fn embed_tokens(tokens: &TokenizedText, emb: &EmbeddingTable) -> Array2<f64> {
    let mut out = Array2::zeros((tokens.tokens.len(), emb.dim()));
    for (i, tok) in tokens.tokens.iter().enumerate() {
        out.row_mut(i).assign(&emb.vector(emb.row_of(&tok.surface)));
    }
    out
}

/// Row ids used for a token sequence, aligned with [`embed_tokens`].
pub fn token_rows(tokens: &TokenizedText, emb: &EmbeddingTable) -> Vec<usize> {
    tokens
        .tokens
        .iter()
        .map(|t| emb.row_of(&t.surface))
        .collect()
}

//! The document reader: featurize paragraphs, encode them with multi-layer
//! BiLSTMs, score answer spans with bilinear classifiers, train with
//! distant or direct supervision, and aggregate predictions across
//! paragraphs with unnormalized exponential scores.

mod checkpoint;
mod decode;
mod embedding;
mod features;
mod layers;
mod lstm;
mod model;
mod train;

pub use decode::{aggregate, decode_span, decode_span_filtered, SpanPrediction, SpanScore};
pub use embedding::{EmbeddingTable, UNK_ROW};
pub use features::{embed_tokens, featurize, FeatureLayout, ParagraphFeatures};
pub use layers::{align_attention, encode_question_vector, softmax, DenseLayer};
pub use lstm::{BiLstmLayer, BiLstmStack, LstmCell};
pub use model::{encode_paragraph, encode_question, score_spans, Forward, Grads, Reader, ReaderParams};
pub use train::{
    exact_match_rate, example_loss, example_loss_and_grads, prepare_dataset,
    select_trainable_question_words, train, Adamax, RawExample, Regime, TrainExample, TrainOptions,
    TrainReport, Trainer,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters and feature toggles of the reader.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ReaderConfig {
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub max_span_len: usize,
    /// How many of the most frequent question words get trainable
    /// embeddings.
    pub finetune_top_k: usize,
    pub batch_size: usize,
    pub use_exact_match: bool,
    pub use_token_features: bool,
    pub use_align: bool,
    /// Lemma matching inside the exact-match feature.
    pub use_lemma: bool,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for ReaderConfig {
    fn default() -> Self {
        ReaderConfig {
            layers: 3,
            hidden: 128,
            dropout: 0.3,
            max_span_len: 15,
            finetune_top_k: 1000,
            batch_size: 32,
            use_exact_match: true,
            // The default annotator carries no POS/NER tags.
            use_token_features: false,
            use_align: true,
            use_lemma: true,
            learning_rate: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl ReaderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 {
            return Err(Error::Config("layers must be >= 1".into()));
        }
        if self.hidden < 1 {
            return Err(Error::Config("hidden must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    /// Streamlined full-pipeline variant: no token features, no lemma
    /// matching.
    pub fn streamlined(mut self) -> Self {
        self.use_token_features = false;
        self.use_lemma = false;
        self
    }
}

//! The reader model: feature construction, paragraph/question encoders,
//! bilinear span scoring, and the full hand-written backward pass.

use std::collections::HashMap;

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::embedding::EmbeddingTable;
use super::features::{align_columns, embed_tokens, featurize, token_rows, FeatureLayout};
use super::layers::{
    align_attention_backward, bilinear_backward, bilinear_scores, encode_question_vector,
    encode_question_vector_backward, AlignCache, DenseLayer,
};
use super::lstm::{dropout_mask, BiLstmStack, StackCache};
use super::ReaderConfig;
use crate::error::{Error, Result};
use crate::textproc::TokenizedText;

/// All trainable tensors except the embedding table.
#[derive(Debug, Clone)]
pub struct ReaderParams {
    pub align: DenseLayer,
    pub para_lstm: BiLstmStack,
    pub q_lstm: BiLstmStack,
    /// Question-word importance vector w.
    pub importance: Array1<f64>,
    pub w_start: Array2<f64>,
    pub w_end: Array2<f64>,
}

impl ReaderParams {
    pub fn init(
        feature_width: usize,
        emb_dim: usize,
        hidden: usize,
        layers: usize,
        rng: &mut ChaCha8Rng,
    ) -> ReaderParams {
        let align = DenseLayer::init(emb_dim, emb_dim, rng);
        let para_lstm = BiLstmStack::init(feature_width, hidden, layers, rng);
        let q_lstm = BiLstmStack::init(emb_dim, hidden, layers, rng);
        let width = 2 * hidden * layers;
        let mut importance = Array1::zeros(width);
        let bound = 1.0 / (width as f64).sqrt();
        for v in importance.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        let mut w_start = Array2::zeros((width, width));
        for v in w_start.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        let mut w_end = Array2::zeros((width, width));
        for v in w_end.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        ReaderParams {
            align,
            para_lstm,
            q_lstm,
            importance,
            w_start,
            w_end,
        }
    }

    pub fn zeros(
        feature_width: usize,
        emb_dim: usize,
        hidden: usize,
        layers: usize,
    ) -> ReaderParams {
        let width = 2 * hidden * layers;
        ReaderParams {
            align: DenseLayer {
                weight: Array2::zeros((emb_dim, emb_dim)),
                bias: Array1::zeros(emb_dim),
            },
            para_lstm: BiLstmStack::zeros(feature_width, hidden, layers),
            q_lstm: BiLstmStack::zeros(emb_dim, hidden, layers),
            importance: Array1::zeros(width),
            w_start: Array2::zeros((width, width)),
            w_end: Array2::zeros((width, width)),
        }
    }

    pub fn zeros_like(&self) -> ReaderParams {
        ReaderParams {
            align: self.align.zeros_like(),
            para_lstm: self.para_lstm.zeros_like(),
            q_lstm: self.q_lstm.zeros_like(),
            importance: Array1::zeros(self.importance.raw_dim()),
            w_start: Array2::zeros(self.w_start.raw_dim()),
            w_end: Array2::zeros(self.w_end.raw_dim()),
        }
    }

    /// Flatten every tensor in declared order: align weight and bias, then
    /// per paragraph-LSTM layer fwd/bwd (input weights, recurrent weights,
    /// bias), question LSTM likewise, importance vector, start and end
    /// bilinear matrices.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |chunk| out.extend_from_slice(chunk));
        out
    }

    pub fn from_flat(template: &ReaderParams, flat: &[f64]) -> ReaderParams {
        let mut params = template.clone();
        let mut cursor = 0usize;
        params.visit_mut(&mut |chunk| {
            chunk.copy_from_slice(&flat[cursor..cursor + chunk.len()]);
            cursor += chunk.len();
        });
        assert_eq!(cursor, flat.len(), "flat parameter length mismatch");
        params
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |chunk| n += chunk.len());
        n
    }

    fn visit(&self, f: &mut impl FnMut(&[f64])) {
        f(self.align.weight.as_slice().unwrap());
        f(self.align.bias.as_slice().unwrap());
        for stack in [&self.para_lstm, &self.q_lstm] {
            for layer in &stack.layers {
                for cell in [&layer.fwd, &layer.bwd] {
                    f(cell.w_input.as_slice().unwrap());
                    f(cell.w_rec.as_slice().unwrap());
                    f(cell.bias.as_slice().unwrap());
                }
            }
        }
        f(self.importance.as_slice().unwrap());
        f(self.w_start.as_slice().unwrap());
        f(self.w_end.as_slice().unwrap());
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&mut [f64])) {
        f(self.align.weight.as_slice_mut().unwrap());
        f(self.align.bias.as_slice_mut().unwrap());
        for stack in [&mut self.para_lstm, &mut self.q_lstm] {
            for layer in &mut stack.layers {
                for cell in [&mut layer.fwd, &mut layer.bwd] {
                    f(cell.w_input.as_slice_mut().unwrap());
                    f(cell.w_rec.as_slice_mut().unwrap());
                    f(cell.bias.as_slice_mut().unwrap());
                }
            }
        }
        f(self.importance.as_slice_mut().unwrap());
        f(self.w_start.as_slice_mut().unwrap());
        f(self.w_end.as_slice_mut().unwrap());
    }
}

/// Gradients of one backward pass: a parameter mirror plus per-row
/// embedding gradients.
pub struct Grads {
    pub params: ReaderParams,
    pub emb_rows: HashMap<usize, Array1<f64>>,
}

/// One forward pass over a (question, paragraph) pair.
pub struct Forward {
    pub start_logits: Array1<f64>,
    pub end_logits: Array1<f64>,
    p_rows: Vec<usize>,
    q_rows: Vec<usize>,
    ep: Array2<f64>,
    eq: Array2<f64>,
    emb_mask_p: Option<Array2<f64>>,
    emb_mask_q: Option<Array2<f64>>,
    align_cache: Option<AlignCache>,
    para_stack: StackCache,
    q_stack: StackCache,
    p_out: Array2<f64>,
    q_out: Array2<f64>,
    b: Array1<f64>,
    q_vec: Array1<f64>,
}

/// The full reader: configuration, embeddings, feature layout and trainable
/// parameters.
pub struct Reader {
    pub config: ReaderConfig,
    pub layout: FeatureLayout,
    pub embedding: EmbeddingTable,
    pub params: ReaderParams,
}

impl Reader {
    /// Initialize with seeded random parameters.
    pub fn new(
        config: ReaderConfig,
        embedding: EmbeddingTable,
        pos_tags: Vec<String>,
        ner_tags: Vec<String>,
        seed: u64,
    ) -> Result<Reader> {
        config.validate()?;
        let layout = FeatureLayout {
            dim: embedding.dim(),
            exact_match: config.use_exact_match,
            token_features: config.use_token_features,
            align: config.use_align,
            use_lemma: config.use_lemma,
            pos_tags,
            ner_tags,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ReaderParams::init(
            layout.width(),
            embedding.dim(),
            config.hidden,
            config.layers,
            &mut rng,
        );
        Ok(Reader {
            config,
            layout,
            embedding,
            params,
        })
    }

    pub(crate) fn from_parts(
        config: ReaderConfig,
        layout: FeatureLayout,
        embedding: EmbeddingTable,
        params: ReaderParams,
    ) -> Reader {
        Reader {
            config,
            layout,
            embedding,
            params,
        }
    }

    /// Encoder output width: 2 * hidden * layers.
    pub fn encoding_width(&self) -> usize {
        self.params.para_lstm.output_width()
    }

    /// Forward pass. `dropout_rng` enables inverted dropout on word
    /// embeddings and LSTM hidden outputs (training mode).
    // as_deref_mut reborrows the Option<&mut Rng> for each encoder.
    #[allow(clippy::needless_option_as_deref)]
    pub fn forward(
        &self,
        question: &TokenizedText,
        paragraph: &TokenizedText,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Forward> {
        if question.tokens.is_empty() {
            return Err(Error::EmptyQuestion);
        }
        if paragraph.tokens.is_empty() {
            return Err(Error::InvalidArgument("empty paragraph".into()));
        }

        let p_rows = token_rows(paragraph, &self.embedding);
        let q_rows = token_rows(question, &self.embedding);
        let mut ep = embed_tokens(paragraph, &self.embedding);
        let mut eq = embed_tokens(question, &self.embedding);

        let p_drop = self.config.dropout;
        let (emb_mask_p, emb_mask_q) = match &mut dropout_rng {
            Some(rng) if p_drop > 0.0 => {
                let mp = dropout_mask(ep.raw_dim(), p_drop, rng);
                let mq = dropout_mask(eq.raw_dim(), p_drop, rng);
                ep *= &mp;
                eq *= &mq;
                (Some(mp), Some(mq))
            }
            _ => (None, None),
        };

        let features = featurize(
            paragraph,
            question,
            &ep,
            &eq,
            &self.params.align,
            &self.layout,
        )?;

        let (p_out, para_stack) = self.params.para_lstm.forward(
            &features.rows,
            dropout_rng.as_deref_mut().and_then(|rng| {
                if p_drop > 0.0 {
                    Some((p_drop, rng))
                } else {
                    None
                }
            }),
        );
        let (q_out, q_stack) = self.params.q_lstm.forward(
            &eq,
            dropout_rng.as_deref_mut().and_then(|rng| {
                if p_drop > 0.0 {
                    Some((p_drop, rng))
                } else {
                    None
                }
            }),
        );

        let (q_vec, b) = encode_question_vector(&q_out, &self.params.importance);
        let start_logits = bilinear_scores(&p_out, &self.params.w_start, &q_vec);
        let end_logits = bilinear_scores(&p_out, &self.params.w_end, &q_vec);

        Ok(Forward {
            start_logits,
            end_logits,
            p_rows,
            q_rows,
            ep,
            eq,
            emb_mask_p,
            emb_mask_q,
            align_cache: features.align_cache,
            para_stack,
            q_stack,
            p_out,
            q_out,
            b,
            q_vec,
        })
    }

    /// Backward pass from logit gradients down to parameter and embedding
    /// gradients.
    pub fn backward(&self, fwd: &Forward, d_start: &Array1<f64>, d_end: &Array1<f64>) -> Grads {
        let mut grads = self.params.zeros_like();

        // Bilinear scorers.
        let bs = bilinear_backward(&fwd.p_out, &self.params.w_start, &fwd.q_vec, d_start);
        let be = bilinear_backward(&fwd.p_out, &self.params.w_end, &fwd.q_vec, d_end);
        grads.w_start = bs.d_w;
        grads.w_end = be.d_w;
        let d_p_out = bs.d_p_out + be.d_p_out;
        let d_q_vec = bs.d_q_vec + be.d_q_vec;

        // Question self-weighting.
        let qv = encode_question_vector_backward(
            &fwd.q_out,
            &self.params.importance,
            &fwd.b,
            &d_q_vec,
        );
        grads.importance = qv.d_importance;

        // Encoders.
        let (q_lstm_grads, d_eq_rnn) = self.params.q_lstm.backward(&fwd.q_stack, &qv.d_q_out);
        grads.q_lstm = q_lstm_grads;
        let (para_lstm_grads, d_features) =
            self.params.para_lstm.backward(&fwd.para_stack, &d_p_out);
        grads.para_lstm = para_lstm_grads;

        // Feature blocks: embedding block and aligned block carry gradients;
        // exact-match and token features are constants.
        let d = self.layout.dim;
        let mut d_ep = d_features.slice(s![.., ..d]).to_owned();
        let mut d_eq = d_eq_rnn;

        if self.layout.align {
            let cols = align_columns(&self.layout);
            let d_f_align = d_features.slice(s![.., cols.start..cols.end]).to_owned();
            let ag = align_attention_backward(
                &fwd.ep,
                &fwd.eq,
                &self.params.align,
                fwd.align_cache.as_ref().expect("align cache present"),
                &d_f_align,
            );
            grads.align = ag.align;
            d_ep += &ag.d_para_emb;
            d_eq += &ag.d_q_emb;
        }

        // Undo the embedding dropout scaling, then accumulate per row.
        if let Some(mask) = &fwd.emb_mask_p {
            d_ep *= mask;
        }
        if let Some(mask) = &fwd.emb_mask_q {
            d_eq *= mask;
        }
        let mut emb_rows: HashMap<usize, Array1<f64>> = HashMap::new();
        for (i, &row) in fwd.p_rows.iter().enumerate() {
            emb_rows
                .entry(row)
                .or_insert_with(|| Array1::zeros(d))
                .scaled_add(1.0, &d_ep.row(i));
        }
        for (j, &row) in fwd.q_rows.iter().enumerate() {
            emb_rows
                .entry(row)
                .or_insert_with(|| Array1::zeros(d))
                .scaled_add(1.0, &d_eq.row(j));
        }

        Grads {
            params: grads,
            emb_rows,
        }
    }

    /// All trainable values as one flat vector: trainable embedding rows
    /// first, then [`ReaderParams::to_flat`].
    pub fn flat_params(&self) -> Vec<f64> {
        let mut flat = self.embedding.trainable_flat();
        flat.extend(self.params.to_flat());
        flat
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let emb_len = self.embedding.trainable_rows().len() * self.embedding.dim();
        self.embedding.set_trainable_flat(&flat[..emb_len]);
        self.params = ReaderParams::from_flat(&self.params, &flat[emb_len..]);
    }

    /// Gradients aligned with [`Reader::flat_params`]. Non-trainable
    /// embedding rows are dropped here.
    pub fn flat_grads(&self, grads: &Grads) -> Vec<f64> {
        let d = self.embedding.dim();
        let mut flat = Vec::with_capacity(self.flat_len());
        for &row in self.embedding.trainable_rows() {
            match grads.emb_rows.get(&row) {
                Some(g) => flat.extend(g.iter()),
                None => flat.extend(std::iter::repeat_n(0.0, d)),
            }
        }
        flat.extend(grads.params.to_flat());
        flat
    }

    pub fn flat_len(&self) -> usize {
        self.embedding.trainable_rows().len() * self.embedding.dim() + self.params.num_params()
    }
}

/// Encode paragraph features into context vectors (inference-only wrapper).
/// Output width is 2 * hidden * layers.
pub fn encode_paragraph(features: &Array2<f64>, params: &ReaderParams) -> Array2<f64> {
    params.para_lstm.forward(features, None).0
}

/// Encode a question embedding matrix into a single vector via the
/// importance-weighted sum of its RNN hidden states.
pub fn encode_question(q_emb: &Array2<f64>, params: &ReaderParams) -> Result<Array1<f64>> {
    if q_emb.nrows() == 0 {
        return Err(Error::EmptyQuestion);
    }
    let (q_out, _) = params.q_lstm.forward(q_emb, None);
    Ok(encode_question_vector(&q_out, &params.importance).0)
}

/// Start and end logits for paragraph vectors against a question vector.
pub fn score_spans(
    p_out: &Array2<f64>,
    q_vec: &Array1<f64>,
    params: &ReaderParams,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if p_out.ncols() != params.w_start.nrows() || q_vec.len() != params.w_start.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "paragraph width {} / question width {} vs bilinear {}x{}",
            p_out.ncols(),
            q_vec.len(),
            params.w_start.nrows(),
            params.w_start.ncols()
        )));
    }
    Ok((
        bilinear_scores(p_out, &params.w_start, q_vec),
        bilinear_scores(p_out, &params.w_end, q_vec),
    ))
}

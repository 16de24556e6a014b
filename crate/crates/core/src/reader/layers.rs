//! Attention, question self-weighting, bilinear span scoring and the span
//! cross-entropy loss, each as a forward/backward pair.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense layer with ReLU used as the nonlinear mapping inside the aligned
/// question embedding; shared between paragraph and question sides.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    /// (out, in)
    pub weight: Array2<f64>,
    /// (out,)
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn init(input: usize, output: usize, rng: &mut ChaCha8Rng) -> DenseLayer {
        let bound = 1.0 / (input as f64).sqrt();
        let mut weight = Array2::zeros((output, input));
        for v in weight.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        DenseLayer {
            weight,
            bias: Array1::zeros(output),
        }
    }

    pub fn zeros_like(&self) -> DenseLayer {
        DenseLayer {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    /// ReLU(W x + b) applied to every row of `xs`.
    pub fn forward_relu(&self, xs: &Array2<f64>) -> Array2<f64> {
        let mut out = xs.dot(&self.weight.t());
        out += &self.bias;
        out.mapv_inplace(|v| v.max(0.0));
        out
    }
}

/// Row-wise softmax.
pub fn softmax_rows(scores: &Array2<f64>) -> Array2<f64> {
    let mut out = scores.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / sum).collect()
}

/// Backward through one softmax row: given y = softmax(x) and dL/dy,
/// dL/dx_i = y_i (dy_i - sum_j y_j dy_j).
#[allow(clippy::needless_range_loop)]
fn softmax_backward_row(y: &[f64], dy: &[f64], dx: &mut [f64]) {
    let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
    for i in 0..y.len() {
        dx[i] = y[i] * (dy[i] - dot);
    }
}

/// Forward cache of [`align_attention`].
pub struct AlignCache {
    /// ReLU outputs of the paragraph side (m, d).
    pub hp: Array2<f64>,
    /// ReLU outputs of the question side (l, d).
    pub hq: Array2<f64>,
    /// Attention rows (m, l), each summing to 1.
    pub attn: Array2<f64>,
}

/// Aligned question embedding: attention over question words for each
/// paragraph token, scores from dot products of ReLU-mapped embeddings.
/// Returns the f_align rows (m, d) and the cache (which holds the attention
/// matrix). An empty question is an error: the softmax is undefined.
pub fn align_attention(
    para_emb: &Array2<f64>,
    q_emb: &Array2<f64>,
    align: &DenseLayer,
) -> crate::error::Result<(Array2<f64>, AlignCache)> {
    if q_emb.nrows() == 0 {
        return Err(crate::error::Error::EmptyQuestion);
    }
    let hp = align.forward_relu(para_emb);
    let hq = align.forward_relu(q_emb);
    let scores = hp.dot(&hq.t());
    let attn = softmax_rows(&scores);
    let f_align = attn.dot(q_emb);
    Ok((f_align, AlignCache { hp, hq, attn }))
}

/// Gradients produced by [`align_attention_backward`].
pub struct AlignGrads {
    pub align: DenseLayer,
    /// (m, d) gradient w.r.t. paragraph embeddings.
    pub d_para_emb: Array2<f64>,
    /// (l, d) gradient w.r.t. question embeddings.
    pub d_q_emb: Array2<f64>,
}

pub fn align_attention_backward(
    para_emb: &Array2<f64>,
    q_emb: &Array2<f64>,
    align: &DenseLayer,
    cache: &AlignCache,
    d_f_align: &Array2<f64>,
) -> AlignGrads {
    let m = para_emb.nrows();
    let l = q_emb.nrows();

    // f_align = attn · q_emb
    let d_attn = d_f_align.dot(&q_emb.t());
    let mut d_q_emb = cache.attn.t().dot(d_f_align);

    // Through the row softmax.
    let mut d_scores = Array2::zeros((m, l));
    for i in 0..m {
        softmax_backward_row(
            cache.attn.row(i).as_slice().unwrap(),
            d_attn.row(i).as_slice().unwrap(),
            d_scores.row_mut(i).as_slice_mut().unwrap(),
        );
    }

    // scores = hp · hq^T
    let mut d_hp = d_scores.dot(&cache.hq);
    let mut d_hq = d_scores.t().dot(&cache.hp);

    // Through ReLU: zero where the activation was clamped.
    for (dv, &v) in d_hp.iter_mut().zip(cache.hp.iter()) {
        if v <= 0.0 {
            *dv = 0.0;
        }
    }
    for (dv, &v) in d_hq.iter_mut().zip(cache.hq.iter()) {
        if v <= 0.0 {
            *dv = 0.0;
        }
    }

    // Dense layer: h = relu(W x + b), dW = sum_rows dz ⊗ x, db = sum dz,
    // dx = dz · W.
    let mut grads = align.zeros_like();
    grads.weight = d_hp.t().dot(para_emb) + d_hq.t().dot(q_emb);
    for r in 0..m {
        grads.bias += &d_hp.row(r);
    }
    for r in 0..l {
        grads.bias += &d_hq.row(r);
    }
    let d_para_emb = d_hp.dot(&align.weight);
    d_q_emb += &d_hq.dot(&align.weight);

    AlignGrads {
        align: grads,
        d_para_emb,
        d_q_emb,
    }
}

/// Question self-weighting: q = sum_j b_j q_j with b = softmax(w · q_j).
/// Returns (q_vec, b).
pub fn encode_question_vector(
    q_out: &Array2<f64>,
    importance: &Array1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let scores: Vec<f64> = q_out.rows().into_iter().map(|r| r.dot(importance)).collect();
    let b = Array1::from_vec(softmax(&scores));
    let q_vec = q_out.t().dot(&b);
    (q_vec, b)
}

pub struct QuestionVectorGrads {
    pub d_importance: Array1<f64>,
    pub d_q_out: Array2<f64>,
}

#[allow(clippy::needless_range_loop)]
pub fn encode_question_vector_backward(
    q_out: &Array2<f64>,
    importance: &Array1<f64>,
    b: &Array1<f64>,
    d_q_vec: &Array1<f64>,
) -> QuestionVectorGrads {
    let l = q_out.nrows();
    // q_vec = sum_j b_j q_j
    let db: Vec<f64> = (0..l).map(|j| q_out.row(j).dot(d_q_vec)).collect();
    let mut d_q_out = Array2::zeros(q_out.raw_dim());
    for j in 0..l {
        d_q_out.row_mut(j).scaled_add(b[j], d_q_vec);
    }
    // b = softmax(u), u_j = w · q_j
    let mut du = vec![0.0; l];
    softmax_backward_row(b.as_slice().unwrap(), &db, &mut du);
    let mut d_importance = Array1::zeros(importance.raw_dim());
    for j in 0..l {
        d_importance.scaled_add(du[j], &q_out.row(j));
        d_q_out.row_mut(j).scaled_add(du[j], importance);
    }
    QuestionVectorGrads {
        d_importance,
        d_q_out,
    }
}

/// Bilinear span scores: logit_i = p_i · W · q.
pub fn bilinear_scores(p_out: &Array2<f64>, w: &Array2<f64>, q_vec: &Array1<f64>) -> Array1<f64> {
    p_out.dot(&w.dot(q_vec))
}

pub struct BilinearGrads {
    pub d_w: Array2<f64>,
    pub d_p_out: Array2<f64>,
    pub d_q_vec: Array1<f64>,
}

pub fn bilinear_backward(
    p_out: &Array2<f64>,
    w: &Array2<f64>,
    q_vec: &Array1<f64>,
    d_logits: &Array1<f64>,
) -> BilinearGrads {
    // logits = P (W q): dP = d ⊗ (Wq); dW = (P^T d) ⊗ q; dq = W^T (P^T d).
    let wq = w.dot(q_vec);
    let mut d_p_out = Array2::zeros(p_out.raw_dim());
    for i in 0..p_out.nrows() {
        d_p_out.row_mut(i).scaled_add(d_logits[i], &wq);
    }
    let v = p_out.t().dot(d_logits);
    let mut d_w = Array2::zeros(w.raw_dim());
    for r in 0..d_w.nrows() {
        d_w.row_mut(r).scaled_add(v[r], q_vec);
    }
    let d_q_vec = w.t().dot(&v);
    BilinearGrads {
        d_w,
        d_p_out,
        d_q_vec,
    }
}

/// Negative log of the summed probability of all gold positions:
/// L = -ln(sum_{g in gold} softmax(logits)_g). Returns (loss, d_logits).
pub fn span_nll(logits: &Array1<f64>, gold: &[usize]) -> (f64, Array1<f64>) {
    debug_assert!(!gold.is_empty());
    let probs = softmax(logits.as_slice().unwrap());
    let gold_mass: f64 = gold.iter().map(|&g| probs[g]).sum();
    let loss = -gold_mass.ln();
    let mut d = Array1::zeros(logits.raw_dim());
    for i in 0..probs.len() {
        let in_gold = if gold.contains(&i) { probs[i] / gold_mass } else { 0.0 };
        d[i] = probs[i] - in_gold;
    }
    (loss, d)
}

//! Training: span negative log-likelihood, Adamax updates, length-sorted
//! mini-batches, and the single/finetune/multitask regimes.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::span_nll;
use super::model::{Grads, Reader};
use crate::error::{Error, Result};
use crate::textproc::{annotate, tokenize, Annotator, TokenizedText};

/// One training example: a question, a paragraph, and at least one gold
/// answer span (inclusive token indices).
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub question: TokenizedText,
    pub paragraph: TokenizedText,
    pub spans: Vec<(usize, usize)>,
}

impl TrainExample {
    /// Tokenize (and optionally annotate) one raw example, validating the
    /// spans against the paragraph.
    pub fn prepare(
        question: &str,
        paragraph: &str,
        spans: Vec<(usize, usize)>,
        annotator: Option<&dyn Annotator>,
    ) -> Result<TrainExample> {
        let mut q = tokenize(question);
        let mut p = tokenize(paragraph);
        if let Some(a) = annotator {
            q = annotate(&q, a)?;
            p = annotate(&p, a)?;
        }
        if q.tokens.is_empty() {
            return Err(Error::InvalidArgument("empty question".into()));
        }
        if spans.is_empty() {
            return Err(Error::InvalidArgument("no gold spans".into()));
        }
        for &(s, e) in &spans {
            if s > e || e >= p.tokens.len() {
                return Err(Error::InvalidArgument(format!(
                    "span ({s}, {e}) out of range for a {}-token paragraph",
                    p.tokens.len()
                )));
            }
        }
        Ok(TrainExample {
            question: q,
            paragraph: p,
            spans,
        })
    }
}

/// An unprocessed example: question, paragraph, gold spans.
pub type RawExample = (String, String, Vec<(usize, usize)>);

/// Prepare a whole dataset, collecting per-example rejections instead of
/// failing outright.
pub fn prepare_dataset(
    raw: impl IntoIterator<Item = RawExample>,
    annotator: Option<&dyn Annotator>,
) -> (Vec<TrainExample>, Vec<(usize, String)>) {
    let mut examples = Vec::new();
    let mut rejected = Vec::new();
    for (i, (q, p, spans)) in raw.into_iter().enumerate() {
        match TrainExample::prepare(&q, &p, spans, annotator) {
            Ok(ex) => examples.push(ex),
            Err(e) => rejected.push((i, e.to_string())),
        }
    }
    (examples, rejected)
}

/// Loss of one example plus gradients: the negative log of the summed gold
/// start probabilities plus the same for ends.
pub fn example_loss_and_grads(
    reader: &Reader,
    example: &TrainExample,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Grads)> {
    let fwd = reader.forward(&example.question, &example.paragraph, dropout_rng)?;
    let mut starts: Vec<usize> = example.spans.iter().map(|s| s.0).collect();
    starts.sort_unstable();
    starts.dedup();
    let mut ends: Vec<usize> = example.spans.iter().map(|s| s.1).collect();
    ends.sort_unstable();
    ends.dedup();

    let (loss_s, d_start) = span_nll(&fwd.start_logits, &starts);
    let (loss_e, d_end) = span_nll(&fwd.end_logits, &ends);
    let grads = reader.backward(&fwd, &d_start, &d_end);
    Ok((loss_s + loss_e, grads))
}

/// Loss only, for finite-difference checks.
pub fn example_loss(reader: &Reader, example: &TrainExample) -> Result<f64> {
    let fwd = reader.forward(&example.question, &example.paragraph, None)?;
    let mut starts: Vec<usize> = example.spans.iter().map(|s| s.0).collect();
    starts.sort_unstable();
    starts.dedup();
    let mut ends: Vec<usize> = example.spans.iter().map(|s| s.1).collect();
    ends.sort_unstable();
    ends.dedup();
    Ok(span_nll(&fwd.start_logits, &starts).0 + span_nll(&fwd.end_logits, &ends).0)
}

/// Adamax: the infinity-norm variant of Adam.
pub struct Adamax {
    m: Vec<f64>,
    u: Vec<f64>,
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adamax {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Adamax {
        Adamax {
            m: vec![0.0; len],
            u: vec![0.0; len],
            t: 0,
            lr,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let correction = 1.0 - self.beta1.powi(self.t as i32);
        let rate = self.lr / correction;
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.u[i] = (self.beta2 * self.u[i]).max(g.abs());
            params[i] -= rate * self.m[i] / (self.u[i] + self.epsilon);
        }
    }
}

/// Training regime: what the example sources mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// One source, parameters trained from their current state.
    Single,
    /// Continue training a pre-trained reader on new (DS) sources.
    Finetune,
    /// All sources merged and trained jointly.
    Multitask,
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    pub seed: u64,
    /// Recompute the trainable embedding rows from the training questions.
    /// Disable to keep the set a pre-trained reader arrived with.
    pub select_trainable: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 10,
            seed: 1,
            select_trainable: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    /// Mean example loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Incremental trainer holding optimizer state, so training can continue
/// across calls (fine-tuning keeps Adamax moments).
pub struct Trainer {
    adamax: Adamax,
    rng: ChaCha8Rng,
    batch_size: usize,
}

impl Trainer {
    pub fn new(reader: &Reader, seed: u64) -> Trainer {
        let c = &reader.config;
        Trainer {
            adamax: Adamax::new(reader.flat_len(), c.learning_rate, c.beta1, c.beta2, c.epsilon),
            rng: ChaCha8Rng::seed_from_u64(seed),
            batch_size: c.batch_size,
        }
    }

    /// Run `epochs` over the examples: sorted by paragraph length, split
    /// into mini-batches, batch order shuffled each epoch, gradients
    /// averaged within a batch. Returns the mean loss per epoch.
    pub fn run_epochs(
        &mut self,
        reader: &mut Reader,
        examples: &[TrainExample],
        epochs: usize,
    ) -> Result<Vec<f64>> {
        if examples.is_empty() {
            return Err(Error::InvalidArgument("no training examples".into()));
        }
        // Stable order: paragraph length, then original position.
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.sort_by_key(|&i| (examples[i].paragraph.tokens.len(), i));
        let batches: Vec<Vec<usize>> = order
            .chunks(self.batch_size)
            .map(|c| c.to_vec())
            .collect();

        let dropout = reader.config.dropout;
        let mut losses = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let mut batch_order: Vec<usize> = (0..batches.len()).collect();
            shuffle(&mut batch_order, &mut self.rng);

            let mut epoch_loss = 0.0;
            for &b in &batch_order {
                let batch = &batches[b];
                let mut flat_grads = vec![0.0; reader.flat_len()];
                let mut batch_loss = 0.0;
                for &i in batch {
                    let (loss, grads) = example_loss_and_grads(
                        reader,
                        &examples[i],
                        if dropout > 0.0 { Some(&mut self.rng) } else { None },
                    )?;
                    batch_loss += loss;
                    let g = reader.flat_grads(&grads);
                    for (acc, v) in flat_grads.iter_mut().zip(&g) {
                        *acc += v;
                    }
                }
                let scale = 1.0 / batch.len() as f64;
                for v in flat_grads.iter_mut() {
                    *v *= scale;
                }
                let mut params = reader.flat_params();
                self.adamax.step(&mut params, &flat_grads);
                reader.set_flat_params(&params);
                epoch_loss += batch_loss;
            }
            losses.push(epoch_loss / examples.len() as f64);
        }
        Ok(losses)
    }
}

fn shuffle(items: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// The `finetune_top_k` most frequent question words (lowercased), ties
/// broken alphabetically.
pub fn select_trainable_question_words(examples: &[TrainExample], k: usize) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for ex in examples {
        for tok in &ex.question.tokens {
            *counts.entry(tok.lower.as_str()).or_insert(0) += 1;
        }
    }
    let mut words: Vec<(&str, usize)> = counts.into_iter().collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    words.truncate(k);
    words.into_iter().map(|(w, _)| w.to_string()).collect()
}

/// Train a reader under a regime. Sources are separate datasets; multitask
/// merges them, single requires exactly one. Returns the loss curve.
pub fn train(
    reader: &mut Reader,
    sources: &[Vec<TrainExample>],
    regime: Regime,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    if sources.is_empty() || sources.iter().all(|s| s.is_empty()) {
        return Err(Error::InvalidArgument("no training examples".into()));
    }
    if regime == Regime::Single && sources.len() != 1 {
        return Err(Error::InvalidArgument(
            "single regime expects exactly one source".into(),
        ));
    }
    let merged: Vec<TrainExample> = sources.iter().flatten().cloned().collect();

    if opts.select_trainable {
        let words = select_trainable_question_words(&merged, reader.config.finetune_top_k);
        reader.embedding.set_trainable(&words);
    }

    let mut trainer = Trainer::new(reader, opts.seed);
    let epoch_losses = trainer.run_epochs(reader, &merged, opts.epochs)?;
    Ok(TrainReport { epoch_losses })
}

/// Fraction of examples whose decoded span is one of the gold spans.
pub fn exact_match_rate(reader: &Reader, examples: &[TrainExample]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for ex in examples {
        let fwd = reader.forward(&ex.question, &ex.paragraph, None)?;
        if let Some(best) = super::decode::decode_span(
            fwd.start_logits.as_slice().unwrap(),
            fwd.end_logits.as_slice().unwrap(),
            reader.config.max_span_len,
        ) {
            if ex.spans.contains(&(best.start, best.end)) {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / examples.len() as f64)
}

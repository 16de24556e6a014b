//! Full-system orchestration: retrieve, read, aggregate; plus retrieval
//! recall and EM/F1 evaluation over whole datasets.

mod config;
mod dataset;
mod metrics;

pub use config::{default_pipeline_reader_config, ConfigFile, PipelineSection, TrainSection};
pub use dataset::{
    char_span_to_token_span, load_dataset, load_qa_jsonl, load_squad, DatasetQuestion,
};
pub use metrics::{exact_match, f1, normalize_answer};

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::DocStore;
use crate::dsbuilder::find_answer_spans;
use crate::error::{Error, Result};
use crate::reader::{aggregate, decode_span_filtered, Reader, SpanPrediction};
use crate::retriever::TfidfIndex;
use crate::textproc::{annotate, tokenize, Annotator, DefaultAnnotator, TokenizedText};

/// The reading half of the system: a reader plus optional annotator and
/// candidate-answer restriction. Usable on its own for gold-context
/// evaluation, or wrapped by [`Pipeline`] for retrieval-backed answering.
pub struct ParagraphReader<'a> {
    pub reader: &'a Reader,
    annotator: Option<Box<dyn Annotator + 'a>>,
    candidates: Option<HashSet<String>>,
}

impl<'a> ParagraphReader<'a> {
    /// When the reader's feature layout uses lemmas, the default annotator
    /// fills them; otherwise text is only tokenized.
    pub fn new(reader: &'a Reader) -> Self {
        let annotator: Option<Box<dyn Annotator>> =
            if reader.layout.use_lemma && reader.layout.exact_match {
                Some(Box::new(DefaultAnnotator))
            } else {
                None
            };
        ParagraphReader {
            reader,
            annotator,
            candidates: None,
        }
    }

    pub fn with_annotator(mut self, annotator: Box<dyn Annotator + 'a>) -> Self {
        self.annotator = Some(annotator);
        self
    }

    /// Restrict answers to this candidate list (normalized at load).
    pub fn with_candidates(mut self, candidates: HashSet<String>) -> Self {
        self.candidates = Some(candidates);
        self
    }

    fn prepare(&self, text: &str) -> Result<TokenizedText> {
        let tt = tokenize(text);
        match &self.annotator {
            Some(a) => annotate(&tt, a.as_ref()),
            None => Ok(tt),
        }
    }

    fn read_paragraph(
        &self,
        question: &TokenizedText,
        paragraph: &TokenizedText,
        doc_id: &str,
        doc_rank: usize,
        para_idx: usize,
    ) -> Result<Option<SpanPrediction>> {
        let fwd = self.reader.forward(question, paragraph, None)?;
        let max_len = self.reader.config.max_span_len;
        let best = match &self.candidates {
            Some(set) => decode_span_filtered(
                fwd.start_logits.as_slice().unwrap(),
                fwd.end_logits.as_slice().unwrap(),
                max_len,
                |i, j| set.contains(&normalize_answer(paragraph.span_text(i, j))),
            ),
            None => decode_span_filtered(
                fwd.start_logits.as_slice().unwrap(),
                fwd.end_logits.as_slice().unwrap(),
                max_len,
                |_, _| true,
            ),
        };
        Ok(best.map(|span| SpanPrediction {
            doc_id: doc_id.to_string(),
            doc_rank,
            paragraph: para_idx,
            span: (span.start, span.end),
            text: paragraph.span_text(span.start, span.end).to_string(),
            log_score: span.log_score,
        }))
    }

    /// Read a list of raw paragraphs (no retrieval) and aggregate. Used by
    /// the gold-document and reader-only evaluation modes.
    pub fn read_gold(
        &self,
        question: &str,
        paragraphs: &[String],
    ) -> Result<Option<SpanPrediction>> {
        let question_tok = self.prepare(question)?;
        let mut predictions = Vec::new();
        for (para_idx, paragraph) in paragraphs.iter().enumerate() {
            let para_tok = self.prepare(paragraph)?;
            if para_tok.tokens.is_empty() {
                continue;
            }
            if let Some(pred) =
                self.read_paragraph(&question_tok, &para_tok, "gold", 0, para_idx)?
            {
                predictions.push(pred);
            }
        }
        Ok(aggregate(&predictions))
    }
}

/// The assembled system: retrieval over index + store, reading via
/// [`ParagraphReader`].
pub struct Pipeline<'a> {
    pub index: &'a TfidfIndex,
    pub store: &'a DocStore,
    pub k: usize,
    inner: ParagraphReader<'a>,
}

impl<'a> Pipeline<'a> {
    /// A pipeline retrieving `k` documents per question.
    pub fn new(index: &'a TfidfIndex, store: &'a DocStore, reader: &'a Reader, k: usize) -> Self {
        Pipeline {
            index,
            store,
            k,
            inner: ParagraphReader::new(reader),
        }
    }

    pub fn reader(&self) -> &Reader {
        self.inner.reader
    }

    pub fn with_annotator(mut self, annotator: Box<dyn Annotator + 'a>) -> Self {
        self.inner = self.inner.with_annotator(annotator);
        self
    }

    /// Restrict answers to this candidate list (normalized at load).
    pub fn with_candidates(mut self, candidates: HashSet<String>) -> Self {
        self.inner = self.inner.with_candidates(candidates);
        self
    }

    /// Answer one question: read every paragraph of the top-k retrieved
    /// documents and take the argmax span by unnormalized exponential
    /// score. None means no answer (empty retrieval or no eligible span).
    pub fn answer(&self, question: &str) -> Result<Option<SpanPrediction>> {
        Ok(self.answer_detailed(question)?.0)
    }

    /// [`Pipeline::answer`] plus every per-paragraph candidate prediction
    /// that entered the aggregation, in document/paragraph order.
    pub fn answer_detailed(
        &self,
        question: &str,
    ) -> Result<(Option<SpanPrediction>, Vec<SpanPrediction>)> {
        let question_tok = self.inner.prepare(question)?;
        if question_tok.tokens.is_empty() {
            return Err(Error::EmptyQuestion);
        }
        let mut predictions = Vec::new();
        for (doc_rank, (doc_id, _)) in self.index.top_k(question, self.k).iter().enumerate() {
            let Some(doc) = self.store.get(doc_id)? else {
                continue;
            };
            for (para_idx, paragraph) in doc.paragraphs().into_iter().enumerate() {
                let para_tok = self.inner.prepare(&paragraph)?;
                if para_tok.tokens.is_empty() {
                    continue;
                }
                if let Some(pred) = self.inner.read_paragraph(
                    &question_tok,
                    &para_tok,
                    doc_id,
                    doc_rank,
                    para_idx,
                )? {
                    predictions.push(pred);
                }
            }
        }
        Ok((aggregate(&predictions), predictions))
    }

    /// Read raw paragraphs with this pipeline's reader, bypassing retrieval.
    pub fn read_gold(
        &self,
        question: &str,
        paragraphs: &[String],
    ) -> Result<Option<SpanPrediction>> {
        self.inner.read_gold(question, paragraphs)
    }
}

/// Load a candidate-answer file: one candidate per line, stored normalized.
pub fn load_candidates(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(normalize_answer)
        .collect())
}

/// Retrieval evaluation: a question counts as a hit when any of its answers
/// appears (token-level, case-insensitive) in any of the top-k documents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalEval {
    pub k: usize,
    pub total: usize,
    pub hits: usize,
    /// Percentage in [0, 100].
    pub recall: f64,
    pub per_question: Vec<bool>,
}

pub fn eval_retrieval(
    questions: &[DatasetQuestion],
    index: &TfidfIndex,
    store: &DocStore,
    k: usize,
) -> Result<RetrievalEval> {
    let mut doc_cache: HashMap<String, TokenizedText> = HashMap::new();
    let mut per_question = Vec::with_capacity(questions.len());
    let mut hits = 0usize;
    for q in questions {
        let mut hit = false;
        'docs: for (doc_id, _) in index.top_k(&q.question, k) {
            let tokens = match doc_cache.get(&doc_id) {
                Some(t) => t,
                None => {
                    let Some(doc) = store.get(&doc_id)? else {
                        continue;
                    };
                    doc_cache.insert(doc_id.clone(), tokenize(&doc.text));
                    &doc_cache[&doc_id]
                }
            };
            for answer in &q.answers {
                if !find_answer_spans(tokens, answer).is_empty() {
                    hit = true;
                    break 'docs;
                }
            }
        }
        per_question.push(hit);
        if hit {
            hits += 1;
        }
    }
    let total = questions.len();
    Ok(RetrievalEval {
        k,
        total,
        hits,
        recall: if total == 0 {
            0.0
        } else {
            100.0 * hits as f64 / total as f64
        },
        per_question,
    })
}

/// Which part of the system an evaluation exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Retrieval + reading over the whole corpus.
    Full,
    /// Reading every paragraph of the gold article (retrieval bypassed).
    GoldDoc,
    /// Reading only the gold paragraph.
    ReaderOnly,
}

impl EvalMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvalMode::Full => "full",
            EvalMode::GoldDoc => "gold-doc",
            EvalMode::ReaderOnly => "reader-only",
        }
    }
}

/// Per-question evaluation record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub question: String,
    pub golds: Vec<String>,
    pub prediction: Option<String>,
    pub em: f64,
    pub f1: f64,
    pub log_score: Option<f64>,
}

/// Dataset-level evaluation report. Metric values are percentages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub mode: String,
    pub exact_match: f64,
    pub f1: f64,
    pub top_k_recall: Option<f64>,
    pub per_question: Vec<QuestionRecord>,
}

/// Score aligned (prediction, log_score) pairs against gold answers.
pub fn eval_qa(
    dataset: &str,
    mode: &str,
    questions: &[DatasetQuestion],
    predictions: &[Option<(String, f64)>],
) -> EvalReport {
    assert_eq!(questions.len(), predictions.len());
    let mut per_question = Vec::with_capacity(questions.len());
    let (mut em_sum, mut f1_sum) = (0.0, 0.0);
    for (q, pred) in questions.iter().zip(predictions) {
        let (em, f1_val) = match pred {
            Some((text, _)) => (exact_match(text, &q.answers), f1(text, &q.answers)),
            None => (0.0, 0.0),
        };
        em_sum += em;
        f1_sum += f1_val;
        per_question.push(QuestionRecord {
            id: q.id.clone(),
            question: q.question.clone(),
            golds: q.answers.clone(),
            prediction: pred.as_ref().map(|(t, _)| t.clone()),
            em,
            f1: f1_val,
            log_score: pred.as_ref().map(|(_, s)| *s),
        });
    }
    let n = questions.len().max(1) as f64;
    EvalReport {
        dataset: dataset.to_string(),
        mode: mode.to_string(),
        exact_match: 100.0 * em_sum / n,
        f1: 100.0 * f1_sum / n,
        top_k_recall: None,
        per_question,
    }
}

fn gold_prediction(
    reader: &ParagraphReader,
    q: &DatasetQuestion,
    mode: EvalMode,
) -> Result<Option<SpanPrediction>> {
    match mode {
        EvalMode::GoldDoc => {
            let paragraphs = q.article_paragraphs.as_ref().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "question {} has no gold article; gold-doc mode needs a SQuAD-format dataset",
                    q.id
                ))
            })?;
            reader.read_gold(&q.question, paragraphs)
        }
        EvalMode::ReaderOnly => {
            let paragraph = q.paragraph.as_ref().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "question {} has no gold paragraph; reader-only mode needs a SQuAD-format dataset",
                    q.id
                ))
            })?;
            reader.read_gold(&q.question, std::slice::from_ref(paragraph))
        }
        EvalMode::Full => Err(Error::InvalidArgument(
            "full mode needs a retrieval pipeline".into(),
        )),
    }
}

/// Evaluate the gold-context modes with just a reader, no corpus needed.
pub fn evaluate_gold(
    reader: &ParagraphReader,
    dataset_name: &str,
    questions: &[DatasetQuestion],
    mode: EvalMode,
) -> Result<EvalReport> {
    if mode == EvalMode::Full {
        return Err(Error::InvalidArgument(
            "full mode needs a retrieval pipeline".into(),
        ));
    }
    let mut predictions: Vec<Option<(String, f64)>> = Vec::with_capacity(questions.len());
    for q in questions {
        let pred = gold_prediction(reader, q, mode)?;
        predictions.push(pred.map(|p| (p.text.clone(), p.log_score)));
    }
    Ok(eval_qa(dataset_name, mode.as_str(), questions, &predictions))
}

/// Run a full evaluation in the given mode.
pub fn evaluate(
    pipeline: &Pipeline,
    dataset_name: &str,
    questions: &[DatasetQuestion],
    mode: EvalMode,
) -> Result<EvalReport> {
    if mode != EvalMode::Full {
        return evaluate_gold(&pipeline.inner, dataset_name, questions, mode);
    }
    let mut predictions: Vec<Option<(String, f64)>> = Vec::with_capacity(questions.len());
    for q in questions {
        let pred = pipeline.answer(&q.question)?;
        predictions.push(pred.map(|p| (p.text.clone(), p.log_score)));
    }
    let mut report = eval_qa(dataset_name, mode.as_str(), questions, &predictions);
    report.top_k_recall =
        Some(eval_retrieval(questions, pipeline.index, pipeline.store, pipeline.k)?.recall);
    Ok(report)
}

//! Distant supervision: turn bare (question, answer) pairs into
//! span-labelled training paragraphs.
//!
//! For each pair the builder retrieves the top 5 documents, keeps only
//! paragraphs that contain an exact token-level answer match, filters by
//! paragraph length [25, 1500] characters, optionally requires question
//! named entities to appear, scores every match position by unigram+bigram
//! overlap with the question in a 20-token window, and keeps up to the top 5
//! paragraphs with positive overlap.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::DocStore;
use crate::error::Result;
use crate::retriever::TfidfIndex;
use crate::textproc::{annotate, normalize_for_retrieval, tokenize, Annotator, TokenizedText};

pub const RETRIEVE_K: usize = 5;
pub const MAX_KEPT_PARAGRAPHS: usize = 5;
pub const MIN_PARAGRAPH_CHARS: usize = 25;
pub const MAX_PARAGRAPH_CHARS: usize = 1500;
pub const OVERLAP_WINDOW: usize = 20;

/// A question with its acceptable answer strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QAPair {
    pub question: String,
    pub answers: Vec<String>,
}

impl QAPair {
    pub fn new(question: impl Into<String>, answers: Vec<String>) -> Self {
        QAPair {
            question: question.into(),
            answers,
        }
    }
}

/// One distantly-supervised training example. Spans are inclusive token
/// indices into the tokenized paragraph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DSExample {
    pub question: String,
    pub doc_id: String,
    pub paragraph: String,
    pub answer_spans: Vec<(usize, usize)>,
    #[serde(rename = "score")]
    pub overlap_score: u32,
}

/// All occurrences of the tokenized answer as a contiguous token
/// subsequence of `paragraph`, case-insensitive on surfaces. Inclusive
/// token-index spans.
pub fn find_answer_spans(paragraph: &TokenizedText, answer: &str) -> Vec<(usize, usize)> {
    let needle: Vec<String> = tokenize(answer)
        .tokens
        .into_iter()
        .map(|t| t.lower)
        .collect();
    if needle.is_empty() || paragraph.tokens.len() < needle.len() {
        return Vec::new();
    }
    let lowers = paragraph.lowers();
    let mut spans = Vec::new();
    for start in 0..=lowers.len() - needle.len() {
        if lowers[start..start + needle.len()]
            .iter()
            .zip(&needle)
            .all(|(a, b)| *a == b)
        {
            spans.push((start, start + needle.len() - 1));
        }
    }
    spans
}

fn normalized_multiset(tokens: &[&str]) -> (HashMap<String, u32>, HashMap<String, u32>) {
    let text = tokens.join(" ");
    let normalized = normalize_for_retrieval(&text);
    let mut unigrams: HashMap<String, u32> = HashMap::new();
    for t in &normalized {
        *unigrams.entry(t.clone()).or_insert(0) += 1;
    }
    let mut bigrams: HashMap<String, u32> = HashMap::new();
    for w in normalized.windows(2) {
        *bigrams.entry(format!("{} {}", w[0], w[1])).or_insert(0) += 1;
    }
    (unigrams, bigrams)
}

fn multiset_intersection(a: &HashMap<String, u32>, b: &HashMap<String, u32>) -> u32 {
    a.iter()
        .map(|(k, &ca)| ca.min(b.get(k).copied().unwrap_or(0)))
        .sum()
}

/// Unigram + bigram multiset overlap between the normalized question and a
/// 20-token window around the match span (span start - 10 to span end + 10,
/// truncated at paragraph edges).
pub fn window_overlap(
    question_tokens: &[&str],
    paragraph_tokens: &[&str],
    match_span: (usize, usize),
    window: usize,
) -> u32 {
    let half = window / 2;
    let lo = match_span.0.saturating_sub(half);
    let hi = (match_span.1 + half + 1).min(paragraph_tokens.len());
    let (q_uni, q_bi) = normalized_multiset(question_tokens);
    let (w_uni, w_bi) = normalized_multiset(&paragraph_tokens[lo..hi]);
    multiset_intersection(&q_uni, &w_uni) + multiset_intersection(&q_bi, &w_bi)
}

/// Named-entity surface strings of a question: maximal runs of tokens
/// carrying the same NER tag, as source slices.
fn question_entities(question: &TokenizedText) -> Vec<String> {
    let mut entities = Vec::new();
    let mut i = 0;
    let tokens = &question.tokens;
    while i < tokens.len() {
        if let Some(tag) = &tokens[i].ner {
            let mut j = i;
            while j + 1 < tokens.len() && tokens[j + 1].ner.as_ref() == Some(tag) {
                j += 1;
            }
            entities.push(question.span_text(i, j).to_string());
            i = j + 1;
        } else {
            i += 1;
        }
    }
    entities
}

#[derive(Debug)]
struct Candidate {
    doc_rank: usize,
    para_idx: usize,
    doc_id: String,
    paragraph: String,
    spans: Vec<(usize, usize)>,
    score: u32,
}

/// Build distantly-supervised examples for one QA pair. An empty result
/// means the example was discarded.
pub fn build_ds(
    qa: &QAPair,
    index: &TfidfIndex,
    store: &DocStore,
    annotator: Option<&dyn Annotator>,
) -> Result<Vec<DSExample>> {
    let question_tok = tokenize(&qa.question);
    let question_lowers: Vec<&str> = question_tok
        .tokens
        .iter()
        .map(|t| t.lower.as_str())
        .collect();

    // Named entities of the question, when an annotator is available.
    let entities: Vec<String> = match annotator {
        Some(a) => question_entities(&annotate(&question_tok, a)?)
            .into_iter()
            .map(|e| e.to_lowercase())
            .collect(),
        None => Vec::new(),
    };

    let mut candidates: Vec<Candidate> = Vec::new();
    for (doc_rank, (doc_id, _score)) in index.top_k(&qa.question, RETRIEVE_K).iter().enumerate() {
        let Some(doc) = store.get(doc_id)? else {
            continue;
        };
        for (para_idx, paragraph) in doc.paragraphs().into_iter().enumerate() {
            let para_tok = tokenize(&paragraph);

            // Exact answer match filter. Blank answer strings are ignored.
            let mut spans: Vec<(usize, usize)> = Vec::new();
            for answer in qa.answers.iter().filter(|a| !a.trim().is_empty()) {
                spans.extend(find_answer_spans(&para_tok, answer));
            }
            if spans.is_empty() {
                continue;
            }
            spans.sort_unstable();
            spans.dedup();

            // Character length filter.
            let char_len = paragraph.chars().count();
            if !(MIN_PARAGRAPH_CHARS..=MAX_PARAGRAPH_CHARS).contains(&char_len) {
                continue;
            }

            // Named entity filter.
            if !entities.is_empty() {
                let para_lower = paragraph.to_lowercase();
                if !entities.iter().all(|e| para_lower.contains(e.as_str())) {
                    continue;
                }
            }

            // Best window overlap over all match positions.
            let para_lowers = para_tok.lowers();
            let score = spans
                .iter()
                .map(|&span| window_overlap(&question_lowers, &para_lowers, span, OVERLAP_WINDOW))
                .max()
                .unwrap_or(0);
            if score == 0 {
                continue;
            }

            candidates.push(Candidate {
                doc_rank,
                para_idx,
                doc_id: doc_id.clone(),
                paragraph,
                spans,
                score,
            });
        }
    }

    // Top paragraphs by overlap; ties favour earlier retrieval rank and
    // earlier paragraph position.
    candidates.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then_with(|| a.doc_rank.cmp(&b.doc_rank))
            .then_with(|| a.para_idx.cmp(&b.para_idx))
    });
    candidates.truncate(MAX_KEPT_PARAGRAPHS);

    Ok(candidates
        .into_iter()
        .map(|c| DSExample {
            question: qa.question.clone(),
            doc_id: c.doc_id,
            paragraph: c.paragraph,
            answer_spans: c.spans,
            overlap_score: c.score,
        })
        .collect())
}

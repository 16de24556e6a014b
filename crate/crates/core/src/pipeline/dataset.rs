//! Dataset loading: SQuAD-format JSON (articles -> paragraphs -> qas) and
//! generic line-delimited {question, answers} JSON.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::dsbuilder::QAPair;
use crate::error::{Error, Result};
use crate::textproc::TokenizedText;

/// One question with gold answers and, when the dataset provides them, the
/// gold paragraph/article context.
#[derive(Debug, Clone)]
pub struct DatasetQuestion {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    /// Gold paragraph text (SQuAD-format datasets).
    pub paragraph: Option<String>,
    /// All paragraphs of the gold article (SQuAD-format datasets).
    pub article_paragraphs: Option<Vec<String>>,
    /// Answer start byte offsets into the gold paragraph, aligned with
    /// `answers` where available.
    pub answer_starts: Vec<Option<usize>>,
}

impl DatasetQuestion {
    pub fn qa_pair(&self) -> QAPair {
        QAPair::new(self.question.clone(), self.answers.clone())
    }
}

#[derive(Deserialize)]
struct SquadFile {
    data: Vec<SquadArticle>,
}

#[derive(Deserialize)]
struct SquadArticle {
    #[serde(default)]
    title: String,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Deserialize)]
struct SquadQa {
    #[serde(default)]
    id: String,
    question: String,
    answers: Vec<SquadAnswer>,
}

#[derive(Deserialize)]
struct SquadAnswer {
    text: String,
    #[serde(default)]
    answer_start: Option<usize>,
}

/// Load a SQuAD-format JSON file.
pub fn load_squad(path: impl AsRef<Path>) -> Result<Vec<DatasetQuestion>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed: SquadFile = serde_json::from_reader(BufReader::new(file)).map_err(|e| {
        Error::Dataset {
            path: path.to_path_buf(),
            message: format!("not SQuAD-format JSON: {e}"),
        }
    })?;

    let mut questions = Vec::new();
    for article in parsed.data {
        let article_paragraphs: Vec<String> =
            article.paragraphs.iter().map(|p| p.context.clone()).collect();
        for paragraph in &article.paragraphs {
            for qa in &paragraph.qas {
                let id = if qa.id.is_empty() {
                    format!("{}#{}", article.title, questions.len())
                } else {
                    qa.id.clone()
                };
                questions.push(DatasetQuestion {
                    id,
                    question: qa.question.clone(),
                    answers: qa.answers.iter().map(|a| a.text.clone()).collect(),
                    paragraph: Some(paragraph.context.clone()),
                    article_paragraphs: Some(article_paragraphs.clone()),
                    answer_starts: qa.answers.iter().map(|a| a.answer_start).collect(),
                });
            }
        }
    }
    Ok(questions)
}

/// Load line-delimited {question, answers} JSON.
pub fn load_qa_jsonl(path: impl AsRef<Path>) -> Result<Vec<DatasetQuestion>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut questions = Vec::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: QAPair = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", line_no + 1),
        })?;
        questions.push(DatasetQuestion {
            id: format!("q{}", line_no + 1),
            question: pair.question,
            answers: pair.answers,
            paragraph: None,
            article_paragraphs: None,
            answer_starts: Vec::new(),
        });
    }
    Ok(questions)
}

/// Load a dataset in either supported format: SQuAD-style JSON first, then
/// line-delimited {question, answers} JSON.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetQuestion>> {
    let path = path.as_ref();
    match load_squad(path) {
        Ok(questions) => Ok(questions),
        Err(squad_err) => load_qa_jsonl(path).map_err(|jsonl_err| Error::Dataset {
            path: path.to_path_buf(),
            message: format!(
                "neither SQuAD JSON ({squad_err}) nor question/answers JSONL ({jsonl_err})"
            ),
        }),
    }
}

/// Inclusive token span covering the byte range [start, end) of the source,
/// or None if no token overlaps it.
pub fn char_span_to_token_span(
    text: &TokenizedText,
    start: usize,
    end: usize,
) -> Option<(usize, usize)> {
    let mut first = None;
    let mut last = None;
    for (i, tok) in text.tokens.iter().enumerate() {
        let (s, e) = tok.char_span;
        if e > start && s < end {
            if first.is_none() {
                first = Some(i);
            }
            last = Some(i);
        }
    }
    match (first, last) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    }
}

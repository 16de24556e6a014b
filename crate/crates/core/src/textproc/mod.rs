//! Deterministic tokenization, normalization, n-gram extraction, and a
//! pluggable linguistic-annotation interface (lemma/POS/NER).

mod annotate;
mod normalize;

pub use annotate::{Annotation, Annotator, DefaultAnnotator, IdentityAnnotator, LookupAnnotator};
pub use normalize::{is_stopword, normalize_for_retrieval, stopwords};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single token with its byte span into the source text.
///
/// `lemma`, `pos` and `ner` stay empty until an [`Annotator`] fills them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lower: String,
    pub lemma: Option<String>,
    pub pos: Option<String>,
    pub ner: Option<String>,
    /// Byte offsets `(start, end)` such that `source[start..end] == surface`.
    pub char_span: (usize, usize),
}

impl Token {
    fn new(surface: &str, start: usize) -> Self {
        Token {
            surface: surface.to_string(),
            lower: surface.to_lowercase(),
            lemma: None,
            pos: None,
            ner: None,
            char_span: (start, start + surface.len()),
        }
    }
}

/// A source string together with its ordered tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedText {
    pub source: String,
    pub tokens: Vec<Token>,
}

impl TokenizedText {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Lowercased surface forms, in order.
    pub fn lowers(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.lower.as_str()).collect()
    }

    /// The source slice covered by the inclusive token span `(start, end)`.
    pub fn span_text(&self, start: usize, end: usize) -> &str {
        let a = self.tokens[start].char_span.0;
        let b = self.tokens[end].char_span.1;
        &self.source[a..b]
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// True for tokens like "U.S." or "U.S": single letters alternating with periods.
fn is_acronym_like(s: &str) -> bool {
    let chars: Vec<char> = s.chars().collect();
    if chars.len() < 3 || !chars[0].is_alphabetic() {
        return false;
    }
    for (i, c) in chars.iter().enumerate() {
        let want_letter = i % 2 == 0;
        if want_letter && !c.is_alphabetic() {
            return false;
        }
        if !want_letter && *c != '.' {
            return false;
        }
    }
    true
}

/// Rule-based tokenizer: split on Unicode whitespace, then peel leading and
/// trailing punctuation into single-character tokens. Internal punctuation
/// ("don't", "3.5", "state-of-the-art") stays attached, and acronym-like
/// tokens ("U.S.") keep their trailing period.
pub fn tokenize(text: &str) -> TokenizedText {
    let mut tokens = Vec::new();
    for (chunk_start, chunk) in split_whitespace_indices(text) {
        tokenize_chunk(chunk, chunk_start, &mut tokens);
    }
    TokenizedText {
        source: text.to_string(),
        tokens,
    }
}

fn split_whitespace_indices(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split_whitespace()
        .scan(0usize, move |cursor, chunk| {
            // Chunks appear in order; find each one starting from the cursor.
            let rel = text[*cursor..].find(chunk).expect("chunk comes from text");
            let start = *cursor + rel;
            *cursor = start + chunk.len();
            Some((start, chunk))
        })
}

fn tokenize_chunk(chunk: &str, chunk_start: usize, out: &mut Vec<Token>) {
    let mut head = 0usize;
    let mut tail = chunk.len();

    // Leading punctuation, one token per character.
    let mut leading = Vec::new();
    for c in chunk.chars() {
        if is_word_char(c) {
            break;
        }
        leading.push((head, c));
        head += c.len_utf8();
    }
    for (off, c) in &leading {
        out.push(Token::new(
            &chunk[*off..*off + c.len_utf8()],
            chunk_start + *off,
        ));
    }
    if head >= tail {
        return;
    }

    // Trailing punctuation, unless the core is acronym-like.
    let mut trailing = Vec::new();
    if !is_acronym_like(&chunk[head..tail]) {
        for c in chunk[head..tail].chars().rev() {
            if is_word_char(c) {
                break;
            }
            tail -= c.len_utf8();
            trailing.push((tail, c));
            if is_acronym_like(&chunk[head..tail]) {
                break;
            }
        }
    }
    trailing.reverse();

    if head < tail {
        out.push(Token::new(&chunk[head..tail], chunk_start + head));
    }
    for (off, c) in trailing {
        out.push(Token::new(
            &chunk[off..off + c.len_utf8()],
            chunk_start + off,
        ));
    }
}

/// Ordered n-grams over token strings; bigrams are joined with a single space.
pub fn ngrams(tokens: &[String], n: usize) -> Result<Vec<String>> {
    if n != 1 && n != 2 {
        return Err(Error::InvalidArgument(format!(
            "ngrams: n must be 1 or 2, got {n}"
        )));
    }
    if tokens.len() < n {
        return Ok(Vec::new());
    }
    Ok(match n {
        1 => tokens.to_vec(),
        _ => tokens
            .windows(2)
            .map(|w| format!("{} {}", w[0], w[1]))
            .collect(),
    })
}

/// Fill lemma/pos/ner on a copy of `text`. Token count, surfaces and spans
/// are unchanged.
pub fn annotate(text: &TokenizedText, annotator: &dyn Annotator) -> Result<TokenizedText> {
    let annotations = annotator.annotate(&text.tokens)?;
    if annotations.len() != text.tokens.len() {
        return Err(Error::Annotator {
            index: annotations.len(),
            message: format!(
                "annotator returned {} annotations for {} tokens",
                annotations.len(),
                text.tokens.len()
            ),
        });
    }
    let mut out = text.clone();
    for (token, ann) in out.tokens.iter_mut().zip(annotations) {
        token.lemma = ann.lemma;
        token.pos = ann.pos;
        token.ner = ann.ner;
    }
    Ok(out)
}

//! Retrieval-side text normalization: lowercase, strip pure-punctuation
//! tokens, drop stopwords. Applied identically to documents and questions.

use std::collections::HashSet;
use std::sync::OnceLock;

use super::tokenize;

/// Embedded stopword list, one word per line. Versioned by file name so
/// indexes built with different lists never silently mix.
const STOPWORDS_V1: &str = include_str!("stopwords-v1.txt");

fn stopword_set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_V1.lines().filter(|l| !l.is_empty()).collect())
}

pub fn is_stopword(word: &str) -> bool {
    stopword_set().contains(word)
}

/// The embedded stopword list in file order.
pub fn stopwords() -> Vec<&'static str> {
    STOPWORDS_V1.lines().filter(|l| !l.is_empty()).collect()
}

fn is_pure_punctuation(token: &str) -> bool {
    !token.chars().any(|c| c.is_alphanumeric())
}

/// Lowercased content tokens of `text`: tokenize, lowercase, drop tokens with
/// no alphanumeric character, drop stopwords. N-gram extraction for the
/// retriever runs on this sequence.
pub fn normalize_for_retrieval(text: &str) -> Vec<String> {
    tokenize(text)
        .tokens
        .into_iter()
        .filter(|t| !is_pure_punctuation(&t.surface))
        .map(|t| t.lower)
        .filter(|w| !is_stopword(w))
        .collect()
}

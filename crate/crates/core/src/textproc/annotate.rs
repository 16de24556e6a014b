//! Pluggable linguistic annotation. The trait is a batch function from a
//! token list to (lemma, pos, ner) triples; adapters for external tools live
//! behind it. The shipped annotators are deterministic and rule-based.

use std::collections::HashMap;

use super::Token;
use crate::error::Result;

/// Optional annotations for one token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Annotation {
    pub lemma: Option<String>,
    pub pos: Option<String>,
    pub ner: Option<String>,
}

/// Batch annotation: must return exactly one [`Annotation`] per input token.
pub trait Annotator: Send + Sync {
    fn annotate(&self, tokens: &[Token]) -> Result<Vec<Annotation>>;
}

/// Lemma = lowercase form, POS/NER absent.
pub struct IdentityAnnotator;

impl Annotator for IdentityAnnotator {
    fn annotate(&self, tokens: &[Token]) -> Result<Vec<Annotation>> {
        Ok(tokens
            .iter()
            .map(|t| Annotation {
                lemma: Some(t.lower.clone()),
                pos: None,
                ner: None,
            })
            .collect())
    }
}

/// Lemma = lowercase plus a small fixed suffix-stripping rule list;
/// POS/NER absent.
pub struct DefaultAnnotator;

fn strip_suffix_lemma(lower: &str) -> String {
    let n = lower.len();
    if n > 4 && lower.ends_with("ies") {
        return format!("{}y", &lower[..n - 3]);
    }
    if n > 4 && lower.ends_with("sses") {
        return lower[..n - 2].to_string();
    }
    if n > 3 && lower.ends_with("es") {
        let stem = &lower[..n - 2];
        if stem.ends_with("ch") || stem.ends_with("sh") || matches!(stem.as_bytes().last(), Some(b'o' | b's' | b'x' | b'z')) {
            return stem.to_string();
        }
    }
    if n > 3
        && lower.ends_with('s')
        && !lower.ends_with("ss")
        && !lower.ends_with("us")
        && !lower.ends_with("is")
    {
        return lower[..n - 1].to_string();
    }
    lower.to_string()
}

impl Annotator for DefaultAnnotator {
    fn annotate(&self, tokens: &[Token]) -> Result<Vec<Annotation>> {
        Ok(tokens
            .iter()
            .map(|t| Annotation {
                lemma: Some(strip_suffix_lemma(&t.lower)),
                pos: None,
                ner: None,
            })
            .collect())
    }
}

/// Dictionary-backed annotator for tests and small controlled corpora:
/// looks up POS/NER tags by lowercased surface, lemma via the default rules.
#[derive(Default)]
pub struct LookupAnnotator {
    pos: HashMap<String, String>,
    ner: HashMap<String, String>,
}

impl LookupAnnotator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_pos(mut self, word: &str, tag: &str) -> Self {
        self.pos.insert(word.to_lowercase(), tag.to_string());
        self
    }

    pub fn with_ner(mut self, word: &str, tag: &str) -> Self {
        self.ner.insert(word.to_lowercase(), tag.to_string());
        self
    }

    /// Tag every token: words without an entry get the fallback POS tag "X"
    /// and no NER tag.
    pub fn annotate_all(&self) -> LookupAllAnnotator<'_> {
        LookupAllAnnotator { inner: self }
    }
}

impl Annotator for LookupAnnotator {
    fn annotate(&self, tokens: &[Token]) -> Result<Vec<Annotation>> {
        Ok(tokens
            .iter()
            .map(|t| Annotation {
                lemma: Some(strip_suffix_lemma(&t.lower)),
                pos: self.pos.get(&t.lower).cloned(),
                ner: self.ner.get(&t.lower).cloned(),
            })
            .collect())
    }
}

/// Variant of [`LookupAnnotator`] that never leaves POS empty, for configs
/// with token features enabled.
pub struct LookupAllAnnotator<'a> {
    inner: &'a LookupAnnotator,
}

impl Annotator for LookupAllAnnotator<'_> {
    fn annotate(&self, tokens: &[Token]) -> Result<Vec<Annotation>> {
        Ok(tokens
            .iter()
            .map(|t| Annotation {
                lemma: Some(strip_suffix_lemma(&t.lower)),
                pos: Some(
                    self.inner
                        .pos
                        .get(&t.lower)
                        .cloned()
                        .unwrap_or_else(|| "X".to_string()),
                ),
                ner: self.inner.ner.get(&t.lower).cloned(),
            })
            .collect())
    }
}

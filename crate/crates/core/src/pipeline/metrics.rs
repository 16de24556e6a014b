//! Answer normalization and the EM / token-F1 metrics.
//!
//! Normalization is pinned, in order: lowercase; delete ASCII punctuation
//! characters; replace the articles a/an/the (as whole words) with spaces;
//! collapse whitespace.

use std::collections::HashMap;

/// Normalize an answer string for comparison.
pub fn normalize_answer(s: &str) -> String {
    let lower = s.to_lowercase();
    let no_punct: String = lower
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    let no_articles: Vec<&str> = no_punct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect();
    no_articles.join(" ")
}

/// Exact match after normalization, against any gold answer.
pub fn exact_match(prediction: &str, golds: &[String]) -> f64 {
    let p = normalize_answer(prediction);
    if golds.iter().any(|g| normalize_answer(g) == p) {
        1.0
    } else {
        0.0
    }
}

fn token_counts(s: &str) -> HashMap<String, u32> {
    let mut counts = HashMap::new();
    for tok in s.split_whitespace() {
        *counts.entry(tok.to_string()).or_insert(0) += 1;
    }
    counts
}

fn f1_single(prediction: &str, gold: &str) -> f64 {
    let p_norm = normalize_answer(prediction);
    let g_norm = normalize_answer(gold);
    // Identical normalized strings score 1 even when both are empty, so
    // F1 >= EM holds on every input.
    if p_norm == g_norm {
        return 1.0;
    }
    let p = token_counts(&p_norm);
    let g = token_counts(&g_norm);
    let common: u32 = p
        .iter()
        .map(|(tok, &c)| c.min(g.get(tok).copied().unwrap_or(0)))
        .sum();
    if common == 0 {
        return 0.0;
    }
    let p_len: u32 = p.values().sum();
    let g_len: u32 = g.values().sum();
    let precision = common as f64 / p_len as f64;
    let recall = common as f64 / g_len as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Token-multiset F1, maximized over the gold answers.
pub fn f1(prediction: &str, golds: &[String]) -> f64 {
    golds
        .iter()
        .map(|g| f1_single(prediction, g))
        .fold(0.0, f64::max)
}

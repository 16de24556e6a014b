//! Span decoding and cross-paragraph aggregation.
//!
//! Scores compare as unnormalized exponentials exp(start_logit)*exp(end_logit);
//! comparisons use the logit sum directly, which is order-equivalent and
//! cannot overflow.

use serde::{Deserialize, Serialize};

/// One decoded span with its combined logit score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanScore {
    pub start: usize,
    pub end: usize,
    /// start_logit + end_logit; the unnormalized score is exp of this.
    pub log_score: f64,
}

/// Best span (i, i') with i <= i' <= i + max_span_len maximizing
/// `exp(start[i]) * exp(end[i'])`. Ties prefer the smallest i, then the
/// smallest i'. Returns None for empty inputs.
pub fn decode_span(
    start_logits: &[f64],
    end_logits: &[f64],
    max_span_len: usize,
) -> Option<SpanScore> {
    decode_span_filtered(start_logits, end_logits, max_span_len, |_, _| true)
}

/// [`decode_span`] restricted to spans accepted by `eligible`; None when no
/// span qualifies (a no-answer result, not an error).
#[allow(clippy::needless_range_loop)]
pub fn decode_span_filtered(
    start_logits: &[f64],
    end_logits: &[f64],
    max_span_len: usize,
    eligible: impl Fn(usize, usize) -> bool,
) -> Option<SpanScore> {
    let m = start_logits.len().min(end_logits.len());
    let mut best: Option<SpanScore> = None;
    for i in 0..m {
        let hi = (i + max_span_len).min(m - 1);
        for j in i..=hi {
            if !eligible(i, j) {
                continue;
            }
            let log_score = start_logits[i] + end_logits[j];
            let better = match &best {
                None => true,
                Some(b) => log_score > b.log_score,
            };
            if better {
                best = Some(SpanScore {
                    start: i,
                    end: j,
                    log_score,
                });
            }
        }
    }
    best
}

/// A decoded answer with provenance across the retrieved set.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpanPrediction {
    pub doc_id: String,
    /// Retrieval rank of the document (0 = best).
    pub doc_rank: usize,
    /// Paragraph position within the document.
    pub paragraph: usize,
    /// Inclusive token span.
    pub span: (usize, usize),
    pub text: String,
    /// start_logit + end_logit.
    pub log_score: f64,
}

impl SpanPrediction {
    /// Unnormalized exponential score; comparisons use `log_score`.
    pub fn score(&self) -> f64 {
        self.log_score.exp()
    }

    fn order_key(&self) -> (usize, usize, usize, usize) {
        (self.doc_rank, self.paragraph, self.span.0, self.span.1)
    }
}

/// Argmax over paragraph spans by unnormalized exponential score. Ties go to
/// the earliest (document rank, paragraph, span) so the result does not
/// depend on list order. None for an empty list (no-answer).
pub fn aggregate(predictions: &[SpanPrediction]) -> Option<SpanPrediction> {
    predictions
        .iter()
        .min_by(|a, b| {
            b.log_score
                .total_cmp(&a.log_score)
                .then_with(|| a.order_key().cmp(&b.order_key()))
        })
        .cloned()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive oracle over all (i, j) pairs.
    #[allow(clippy::needless_range_loop)]
    fn brute_force(start: &[f64], end: &[f64], max_len: usize) -> Option<(usize, usize, f64)> {
        let m = start.len();
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..m {
            for j in i..m {
                if j - i > max_len {
                    continue;
                }
                let s = start[i] + end[j];
                if best.is_none() || s > best.unwrap().2 {
                    best = Some((i, j, s));
                }
            }
        }
        best
    }

    #[test]
    fn decode_matches_hand_enumeration() {
        // start = ln(.1), ln(.7), ln(.2); end = ln(.2), ln(.1), ln(.7):
        // best product is 0.7 * 0.7 = 0.49 at (1, 2).
        let start = [0.1f64.ln(), 0.7f64.ln(), 0.2f64.ln()];
        let end = [0.2f64.ln(), 0.1f64.ln(), 0.7f64.ln()];
        let got = decode_span(&start, &end, 15).unwrap();
        assert_eq!((got.start, got.end), (1, 2));
        assert!((got.log_score.exp() - 0.49).abs() < 1e-12);
    }

    #[test]
    fn zero_max_len_degenerates_to_single_token() {
        let start = [0.0, 3.0, 1.0];
        let end = [5.0, -1.0, 0.0];
        let got = decode_span(&start, &end, 0).unwrap();
        // argmax of start[i] + end[i] = max(5, 2, 1) at i = 0.
        assert_eq!((got.start, got.end), (0, 0));
    }

    #[test]
    fn ties_prefer_earliest_span() {
        let start = [1.0, 1.0];
        let end = [1.0, 1.0];
        let got = decode_span(&start, &end, 15).unwrap();
        assert_eq!((got.start, got.end), (0, 0));
    }

    #[test]
    fn empty_logits_yield_none() {
        assert!(decode_span(&[], &[], 15).is_none());
    }

    #[test]
    fn candidate_filter_restricts_spans() {
        let start = [0.0, 10.0, 0.0];
        let end = [0.0, 10.0, 0.0];
        // Unrestricted winner is (1, 1); restrict to spans starting at 0.
        let got = decode_span_filtered(&start, &end, 15, |i, _| i == 0).unwrap();
        assert_eq!(got.start, 0);
        // No eligible span at all: None, not an error.
        assert!(decode_span_filtered(&start, &end, 15, |_, _| false).is_none());
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let m = rng.random_range(1..=50);
            let start: Vec<f64> = (0..m).map(|_| rng.random_range(-4.0..4.0)).collect();
            let end: Vec<f64> = (0..m).map(|_| rng.random_range(-4.0..4.0)).collect();
            for max_len in [0usize, 1, 15, 50] {
                let got = decode_span(&start, &end, max_len).unwrap();
                let want = brute_force(&start, &end, max_len).unwrap();
                assert_eq!((got.start, got.end), (want.0, want.1));
                assert_eq!(got.log_score, want.2);
            }
        }
    }

    fn pred(doc_rank: usize, paragraph: usize, log_score: f64) -> SpanPrediction {
        SpanPrediction {
            doc_id: format!("d{doc_rank}"),
            doc_rank,
            paragraph,
            span: (0, 0),
            text: "x".into(),
            log_score,
        }
    }

    #[test]
    fn aggregate_single_is_identity() {
        let p = pred(0, 0, 1.5);
        assert_eq!(aggregate(std::slice::from_ref(&p)).unwrap(), p);
        assert!(aggregate(&[]).is_none());
    }

    #[test]
    fn aggregate_prefers_higher_unnormalized_score() {
        // Unnormalized scores 0.9 and 1.7: the second wins regardless of any
        // per-paragraph normalization.
        let a = pred(0, 0, 0.9f64.ln());
        let b = pred(1, 0, 1.7f64.ln());
        let got = aggregate(&[a, b.clone()]).unwrap();
        assert_eq!(got, b);
    }

    #[test]
    fn aggregate_ignores_weaker_additions() {
        let a = pred(0, 0, 2.0);
        let b = pred(1, 0, 1.0);
        let before = aggregate(std::slice::from_ref(&a)).unwrap();
        let after = aggregate(&[a, b]).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn aggregate_is_order_invariant() {
        let preds = vec![pred(2, 1, 0.7), pred(0, 3, 0.7), pred(1, 0, 0.3)];
        let mut reversed = preds.clone();
        reversed.reverse();
        // Equal top scores: the earliest (doc_rank, paragraph) wins either way.
        assert_eq!(aggregate(&preds), aggregate(&reversed));
        assert_eq!(aggregate(&preds).unwrap().doc_rank, 0);
    }
}

use std::cmp::Ordering;

use super::{Reader, SpanScoreMatrix};
use crate::error::{Error, Result};
use crate::taskconv::{convert_pair, PairInstance, PairMode, Scheme, SpanPrediction, UnifiedInput};
use crate::wikicorpus::TokenizerRegistry;

/// Anything that scores the candidates of a unified input.
pub trait SpanScorer {
    fn score_input(&self, input: &UnifiedInput) -> SpanScoreMatrix;
}

impl SpanScorer for Reader {
    fn score_input(&self, input: &UnifiedInput) -> SpanScoreMatrix {
        self.score(input)
    }
}

/// Higher probability first, then earlier start, then shorter span.
fn rank(a: ((usize, usize), f64), b: ((usize, usize), f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then(a.0 .0.cmp(&b.0 .0))
        .then((a.0 .1 - a.0 .0).cmp(&(b.0 .1 - b.0 .0)))
}

fn overlaps(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

fn extract_with_probs(scores: &SpanScoreMatrix, threshold: f64) -> Vec<((usize, usize), f64)> {
    if scores.cls_prob() <= threshold {
        return Vec::new();
    }
    let mut above: Vec<((usize, usize), f64)> = (0..scores.len())
        .filter(|&k| scores.mask[k] && scores.candidates[k] != (0, 0))
        .map(|k| (scores.candidates[k], scores.prob(k)))
        .filter(|&(_, p)| p > threshold)
        .collect();
    above.sort_by(|&a, &b| rank(a, b));
    let mut kept: Vec<((usize, usize), f64)> = Vec::new();
    for cand in above {
        if kept.iter().all(|k| !overlaps(k.0, cand.0)) {
            kept.push(cand);
        }
    }
    kept.sort_by_key(|k| k.0);
    kept
}

/// Spans extracted from one input, sorted by position. Empty when the
/// `[CLS]` probability does not exceed `threshold`; otherwise every context
/// span above `threshold`, resolving overlaps greedily by descending
/// probability.
pub fn decode_extraction(scores: &SpanScoreMatrix, threshold: f64) -> Vec<(usize, usize)> {
    extract_with_probs(scores, threshold).into_iter().map(|(s, _)| s).collect()
}

/// Index of the label whose input has the highest `[CLS]` probability; the
/// first such label on ties.
pub fn decode_classification(per_label: &[SpanScoreMatrix]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in per_label.iter().enumerate() {
        let p = s.cls_prob();
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((i, p));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::Empty("label list"))
}

/// Decoded spans and `[CLS]` probability in the form task decoding expects.
pub fn to_span_prediction(scores: &SpanScoreMatrix, threshold: f64) -> SpanPrediction {
    SpanPrediction {
        spans: extract_with_probs(scores, threshold)
            .into_iter()
            .map(|((s, e), p)| (s, e, p))
            .collect(),
        cls_prob: scores.cls_prob(),
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Rationale {
    /// 1 or 2: the sentence the span lies in.
    pub sentence: usize,
    /// Inclusive token indices within that sentence.
    pub start: usize,
    pub end: usize,
    pub tokens: Vec<String>,
    pub prob: f64,
}

/// Scores the pair twice, each sentence serving once as the context, and
/// returns the most probable context span over both passes. The first pass
/// (sentence 2 as context) wins ties. A span is returned even when the
/// `[CLS]` slot outscores every span.
pub fn extract_rationale(
    model: &impl SpanScorer,
    sentence1: &str,
    sentence2: &str,
    label: &str,
    scheme: &Scheme,
    tokenizers: &TokenizerRegistry,
) -> Result<Rationale> {
    let pair = PairInstance {
        id: "rationale".into(),
        lang: "en".into(),
        sentence1: sentence1.into(),
        sentence2: sentence2.into(),
        label: Some(label.into()),
    };
    let passes = convert_pair(&pair, scheme, PairMode::Rationale { both_orders: true }, tokenizers)?;
    let mut best: Option<(usize, (usize, usize), f64, &UnifiedInput)> = None;
    for (pass, input) in passes.iter().enumerate() {
        let scores = model.score_input(input);
        for k in 0..scores.len() {
            let span = scores.candidates[k];
            if span == (0, 0) || !scores.mask[k] {
                continue;
            }
            let p = scores.prob(k);
            let better = match best {
                None => true,
                Some((bpass, bspan, bp, _)) => {
                    p > bp || (p == bp && bpass == pass && rank((span, p), (bspan, bp)) == Ordering::Less)
                }
            };
            if better {
                best = Some((pass, span, p, input));
            }
        }
    }
    let (pass, span, prob, input) = best.ok_or(Error::Empty("rationale candidates"))?;
    let (start, end) = input.to_local(span).expect("context candidate");
    Ok(Rationale {
        sentence: if pass == 0 { 2 } else { 1 },
        start,
        end,
        tokens: input.context[start..=end].to_vec(),
        prob,
    })
}

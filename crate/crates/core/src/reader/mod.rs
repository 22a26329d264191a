//! Span-extraction reader: a sequence encoder followed by a boundary-pair
//! scorer, trained with binary cross-entropy over every candidate span.
//!
//! Candidates are the context-side spans no wider than
//! [`ReaderConfig::max_span`] plus the `[CLS]` slot `(0, 0)`, whose
//! probability works as a sequence-level relevance score.

mod checkpoint;
mod decode;
mod model;
pub mod tape;
mod train;
mod vocab;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taskconv::CONTEXT_SHIFT;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use decode::{decode_classification, decode_extraction, extract_rationale, to_span_prediction, Rationale, SpanScorer};
pub use model::{positional_table, EmbeddingEncoder, Encoder, Reader, SpanExtractor, TransformerEncoder};
pub use train::{train, write_loss_trace, AdamW, Mode, Trainer};
pub use vocab::{Vocab, CLS_ID, MASK_ID, PAD_ID, SEP_ID, UNK_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    /// Self-attention blocks over token embeddings and sinusoidal positions.
    #[default]
    Transformer,
    /// Token embeddings plus positions, no mixing between positions.
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReaderConfig {
    pub encoder: EncoderKind,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_mult: usize,
    /// Widest candidate span, in tokens.
    pub max_span: usize,
    /// Probability threshold for extraction.
    pub threshold: f64,
    /// Longest assembled input; longer contexts are cut.
    pub max_len: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_steps: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for ReaderConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderKind::Transformer,
            hidden: 128,
            layers: 2,
            heads: 4,
            ffn_mult: 4,
            max_span: 30,
            threshold: 0.5,
            max_len: 384,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            warmup_steps: 0,
            clip_norm: 1.0,
            batch_size: 16,
            steps: 1000,
            seed: 0,
        }
    }
}

impl ReaderConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail("threshold must lie strictly between 0 and 1");
        }
        if self.max_span == 0 {
            return fail("max_span must be at least 1");
        }
        if self.hidden == 0 || self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return fail("hidden width must be a positive multiple of the head count");
        }
        if self.max_len < CONTEXT_SHIFT + 2 {
            return fail("max_len is too small to hold the special tokens");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        Ok(())
    }
}

/// Hidden states for one assembled input.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    pub hidden: ndarray::Array2<f64>,
    pub mask: Vec<bool>,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.hidden.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.hidden.nrows() == 0
    }
}

/// Context-side spans `(i, j)` with `j - i < max_span`, preceded by `(0, 0)`.
pub fn span_candidates(query_len: usize, context_len: usize, max_span: usize) -> Vec<(usize, usize)> {
    let off = query_len + CONTEXT_SHIFT;
    let end = off + context_len;
    let mut out = Vec::with_capacity(1 + context_len * max_span.min(context_len));
    out.push((0, 0));
    for i in off..end {
        for j in i..end.min(i + max_span) {
            out.push((i, j));
        }
    }
    out
}

/// Logits for every candidate of one input.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanScoreMatrix {
    pub candidates: Vec<(usize, usize)>,
    pub logits: Vec<f64>,
    pub mask: Vec<bool>,
    pub max_span: usize,
}

impl SpanScoreMatrix {
    pub fn new(candidates: Vec<(usize, usize)>, logits: Vec<f64>, max_span: usize) -> Result<Self> {
        if candidates.len() != logits.len() {
            return Err(Error::LengthMismatch {
                left: candidates.len(),
                right: logits.len(),
            });
        }
        let mask = vec![true; candidates.len()];
        Ok(Self {
            candidates,
            logits,
            mask,
            max_span,
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn prob(&self, k: usize) -> f64 {
        tape::sigmoid(self.logits[k])
    }

    pub fn position(&self, span: (usize, usize)) -> Option<usize> {
        self.candidates.iter().position(|&c| c == span)
    }

    /// Probability of the `[CLS]` slot; 0 when it is not a candidate.
    pub fn cls_prob(&self) -> f64 {
        self.position((0, 0)).filter(|&k| self.mask[k]).map_or(0.0, |k| self.prob(k))
    }
}

/// Per-candidate targets: the gold spans and `(0, 0)` are positive when the
/// input is answerable; everything is negative otherwise.
pub fn wae_targets(
    candidates: &[(usize, usize)],
    gold: &[(usize, usize)],
    answerable: bool,
    max_span: usize,
) -> Result<Vec<f64>> {
    if answerable && gold.is_empty() {
        return Err(Error::AnswerableWithoutGold);
    }
    let mut targets = vec![0.0; candidates.len()];
    if !answerable {
        if !gold.is_empty() {
            return Err(Error::Config("unanswerable input carries gold spans".into()));
        }
        return Ok(targets);
    }
    let find = |span: (usize, usize)| {
        candidates.iter().position(|&c| c == span).ok_or(Error::CandidateOutOfBounds {
            start: span.0,
            end: span.1,
            len: candidates.len(),
        })
    };
    targets[find((0, 0))?] = 1.0;
    for &(s, e) in gold {
        if (s, e) == (0, 0) {
            continue;
        }
        if e >= s && e - s >= max_span {
            warn!("dropping gold span ({s}, {e}) wider than {max_span} tokens");
            continue;
        }
        targets[find((s, e))?] = 1.0;
    }
    Ok(targets)
}

/// Mean binary cross-entropy over the valid candidates.
pub fn wae_loss(scores: &SpanScoreMatrix, gold: &[(usize, usize)], answerable: bool) -> Result<f64> {
    let targets = wae_targets(&scores.candidates, gold, answerable, scores.max_span)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for ((&z, &y), &valid) in scores.logits.iter().zip(&targets).zip(&scores.mask) {
        if valid {
            total += tape::bce_with_logit(z, y);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("valid candidates"));
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_count_example() {
        // 5 context tokens with a width cap of 3: 3+3+3+2+1 spans, plus [CLS]
        let c = span_candidates(2, 5, 3);
        assert_eq!(c.len(), 13);
        assert_eq!(c[0], (0, 0));
        assert_eq!(c[1], (5, 5));
        assert!(c[1..].iter().all(|&(i, j)| i <= j && j - i < 3 && i >= 5 && j < 10));
    }

    #[test]
    fn candidate_count_formula() {
        for q in 0..4 {
            for n in 0..12 {
                for l in 1..6 {
                    let expect = 1 + (0..n).map(|p| l.min(n - p)).sum::<usize>();
                    assert_eq!(span_candidates(q, n, l).len(), expect);
                }
            }
        }
    }

    #[test]
    fn single_positive_at_zero_is_ln2() {
        let s = SpanScoreMatrix::new(vec![(0, 0)], vec![0.0], 30).unwrap();
        let l = wae_loss(&s, &[(0, 0)], true).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn confident_negatives_approach_zero() {
        let c = span_candidates(1, 4, 2);
        let s = SpanScoreMatrix::new(c.clone(), vec![-50.0; c.len()], 2).unwrap();
        assert!(wae_loss(&s, &[], false).unwrap() < 1e-20);
    }

    #[test]
    fn answerable_without_gold_is_error() {
        let c = span_candidates(1, 4, 2);
        let s = SpanScoreMatrix::new(c.clone(), vec![0.0; c.len()], 2).unwrap();
        assert!(matches!(wae_loss(&s, &[], true), Err(Error::AnswerableWithoutGold)));
    }

    #[test]
    fn wide_gold_dropped_and_foreign_gold_rejected() {
        let c = span_candidates(1, 6, 2);
        let t = wae_targets(&c, &[(4, 7), (5, 5)], true, 2).unwrap();
        assert_eq!(t.iter().sum::<f64>(), 2.0);
        assert!(wae_targets(&c, &[(1, 1)], true, 2).is_err());
    }

    #[test]
    fn config_checks() {
        assert!(ReaderConfig::default().validate().is_ok());
        let bad = ReaderConfig {
            threshold: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ReaderConfig {
            max_span: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Scheme, TaskKind, UnifiedInput};
use crate::error::{Error, Result};

/// Extracted spans for one input, in assembled coordinates, with the
/// probability of the `[CLS]` slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpanPrediction {
    pub spans: Vec<(usize, usize, f64)>,
    pub cls_prob: f64,
}

impl SpanPrediction {
    /// Treats the gold annotation of an input as a certain prediction.
    pub fn from_gold(input: &UnifiedInput) -> Self {
        Self {
            spans: input
                .gold
                .iter()
                .filter(|&&s| s != (0, 0))
                .map(|&(s, e)| (s, e, 1.0))
                .collect(),
            cls_prob: if input.answerable() { 1.0 } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaggedSpan {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

/// A prediction in the native form of its task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum TaskPrediction {
    Eqa { id: String, answer: String },
    Tagging { id: String, spans: Vec<TaggedSpan> },
    Pair { id: String, label: String },
}

impl TaskPrediction {
    pub fn id(&self) -> &str {
        match self {
            TaskPrediction::Eqa { id, .. } | TaskPrediction::Tagging { id, .. } | TaskPrediction::Pair { id, .. } => id,
        }
    }
}

/// Collapses the predictions for all inputs of one source instance.
pub fn decode_to_task(group: &[(UnifiedInput, SpanPrediction)], scheme: &Scheme) -> Result<TaskPrediction> {
    let (first, _) = group.first().ok_or(Error::Empty("prediction group"))?;
    let id = first.source_id.clone();
    match scheme.task {
        TaskKind::Eqa => {
            let mut best: Option<(&UnifiedInput, (usize, usize), f64)> = None;
            for (input, pred) in group {
                for &(s, e, p) in &pred.spans {
                    if input.to_local((s, e)).is_none() {
                        warn!("{id}: dropping span ({s}, {e}) outside the context");
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((_, (bs, be), bp)) => p > bp || (p == bp && (s, e - s) < (bs, be - bs)),
                    };
                    if better {
                        best = Some((input, (s, e), p));
                    }
                }
            }
            let answer = best
                .map(|(input, span, _)| input.span_tokens(span).join(" "))
                .unwrap_or_default();
            Ok(TaskPrediction::Eqa { id, answer })
        }
        TaskKind::Ner | TaskKind::Absa => {
            let mut spans = Vec::new();
            for (input, pred) in group {
                let label = input.label.clone().ok_or(Error::Empty("label on tagging input"))?;
                for &(s, e, _) in &pred.spans {
                    match input.to_local((s, e)) {
                        Some((ls, le)) => spans.push(TaggedSpan {
                            label: label.clone(),
                            start: ls,
                            end: le,
                        }),
                        None => warn!("{id}: dropping span ({s}, {e}) outside the context"),
                    }
                }
            }
            spans.sort();
            spans.dedup();
            Ok(TaskPrediction::Tagging { id, spans })
        }
        TaskKind::Pair => {
            // Ties go to the earlier label in scheme order.
            let rank = |input: &UnifiedInput| {
                input
                    .label
                    .as_deref()
                    .and_then(|l| scheme.labels.iter().position(|d| d.name == l))
                    .unwrap_or(usize::MAX)
            };
            let mut best: Option<(&UnifiedInput, f64)> = None;
            for (input, pred) in group {
                let better = match best {
                    None => true,
                    Some((b, p)) => pred.cls_prob > p || (pred.cls_prob == p && rank(input) < rank(b)),
                };
                if better {
                    best = Some((input, pred.cls_prob));
                }
            }
            let (input, _) = best.expect("group is non-empty");
            let label = input.label.clone().ok_or(Error::Empty("label on pair input"))?;
            Ok(TaskPrediction::Pair { id, label })
        }
    }
}

//! Recasting downstream tasks as query/context/span inputs and mapping
//! predictions back.
//!
//! Every task ends up as `[CLS] query [SEP] [SEP] context [SEP]`. Gold spans
//! are inclusive indices into that assembled sequence; `(0, 0)` is the
//! sequence-level answer carried by `[CLS]`.

mod convert;
mod decode;
mod scheme;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mrcgen::MrcExample;

pub use convert::{convert_eqa, convert_pair, convert_tagging, convert_task, PairMode};
pub use decode::{decode_to_task, SpanPrediction, TaggedSpan, TaskPrediction};
pub use scheme::{LabelDef, Scheme, TaskKind, Templates};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// Number of special tokens before the context: `[CLS]` and two `[SEP]`s.
pub const CONTEXT_SHIFT: usize = 3;

/// A gold answer in context coordinates, or the sequence-level slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LocalSpan {
    Cls,
    Context(usize, usize),
}

/// A downstream instance in its native form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum TaskInstance {
    Eqa(EqaInstance),
    Tagging(TaggingInstance),
    Pair(PairInstance),
}

impl TaskInstance {
    pub fn id(&self) -> &str {
        match self {
            TaskInstance::Eqa(x) => &x.id,
            TaskInstance::Tagging(x) => &x.id,
            TaskInstance::Pair(x) => &x.id,
        }
    }

    pub fn lang(&self) -> &str {
        match self {
            TaskInstance::Eqa(x) => &x.lang,
            TaskInstance::Tagging(x) => &x.lang,
            TaskInstance::Pair(x) => &x.lang,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqaInstance {
    pub id: String,
    #[serde(default = "default_lang")]
    pub lang: String,
    pub question: String,
    pub context: String,
    #[serde(default)]
    pub answers: Vec<String>,
    /// Optional character offsets of each answer in `context`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_starts: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggingInstance {
    pub id: String,
    #[serde(default = "default_lang")]
    pub lang: String,
    pub tokens: Vec<String>,
    /// (label, start, end), inclusive token indices.
    #[serde(default)]
    pub spans: Vec<(String, usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairInstance {
    pub id: String,
    #[serde(default = "default_lang")]
    pub lang: String,
    pub sentence1: String,
    pub sentence2: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn default_lang() -> String {
    "en".to_string()
}

/// A model-ready input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnifiedInput {
    pub source_id: String,
    pub lang: String,
    pub label: Option<String>,
    pub query: Vec<String>,
    pub context: Vec<String>,
    /// Inclusive spans over the assembled sequence, sorted.
    pub gold: Vec<(usize, usize)>,
}

impl UnifiedInput {
    pub fn context_offset(&self) -> usize {
        self.query.len() + CONTEXT_SHIFT
    }

    pub fn len(&self) -> usize {
        self.query.len() + self.context.len() + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn answerable(&self) -> bool {
        !self.gold.is_empty()
    }

    pub fn assembled(&self) -> Vec<String> {
        let mut seq = Vec::with_capacity(self.len());
        seq.push(CLS.to_string());
        seq.extend(self.query.iter().cloned());
        seq.push(SEP.to_string());
        seq.push(SEP.to_string());
        seq.extend(self.context.iter().cloned());
        seq.push(SEP.to_string());
        seq
    }

    /// Maps an assembled span back to context coordinates; `None` for the
    /// `[CLS]` slot or spans outside the context.
    pub fn to_local(&self, span: (usize, usize)) -> Option<(usize, usize)> {
        let off = self.context_offset();
        if span.0 < off || span.1 < span.0 || span.1 >= off + self.context.len() {
            return None;
        }
        Some((span.0 - off, span.1 - off))
    }

    /// Surface tokens of an assembled span.
    pub fn span_tokens(&self, span: (usize, usize)) -> Vec<String> {
        self.assembled()[span.0..=span.1].to_vec()
    }

    /// Shortens the context so the assembled length fits `max_len`. The query
    /// is never cut; gold spans that no longer fit are dropped. Returns the
    /// number of context tokens removed.
    pub fn truncate_context(&mut self, max_len: usize) -> usize {
        if self.len() <= max_len {
            return 0;
        }
        let keep = max_len.saturating_sub(self.query.len() + 4);
        let removed = self.context.len() - keep.min(self.context.len());
        self.context.truncate(keep);
        let limit = self.context_offset() + self.context.len();
        self.gold.retain(|&(s, e)| (s, e) == (0, 0) || e < limit);
        removed
    }

    /// Keeps the first `max_query` query tokens and shifts context spans to
    /// match. Returns the number of query tokens removed.
    pub fn truncate_query(&mut self, max_query: usize) -> usize {
        let removed = self.query.len().saturating_sub(max_query);
        if removed == 0 {
            return 0;
        }
        self.query.truncate(max_query);
        for span in self.gold.iter_mut().filter(|s| **s != (0, 0)) {
            span.0 -= removed;
            span.1 -= removed;
        }
        removed
    }

    /// Record form using the `mrc.jsonl` schema plus `source_id` and `label`.
    pub fn to_record(&self, id: String) -> MrcExample {
        let answers: Vec<(usize, usize)> = self.gold.iter().filter_map(|&s| self.to_local(s)).collect();
        MrcExample {
            id,
            lang: self.lang.clone(),
            entity: String::new(),
            query: self.query.clone(),
            context: self.context.clone(),
            answers,
            answerable: self.answerable(),
            provenance: None,
            source_id: Some(self.source_id.clone()),
            label: self.label.clone(),
        }
    }

    /// Reads a record; an answerable record without answers has the
    /// `[CLS]` slot as its only gold span.
    pub fn from_record(rec: &MrcExample) -> Result<Self> {
        let mut spans: Vec<LocalSpan> = rec.answers.iter().map(|&(s, e)| LocalSpan::Context(s, e)).collect();
        if rec.answerable && spans.is_empty() {
            spans.push(LocalSpan::Cls);
        }
        let mut input = assemble(rec.query.clone(), rec.context.clone(), &spans)?;
        input.source_id = rec.source_id.clone().unwrap_or_else(|| rec.id.clone());
        input.lang = rec.lang.clone();
        input.label = rec.label.clone();
        Ok(input)
    }
}

/// Builds the assembled input, shifting context spans by `|query| + 3`.
pub fn assemble(query: Vec<String>, context: Vec<String>, spans: &[LocalSpan]) -> Result<UnifiedInput> {
    let off = query.len() + CONTEXT_SHIFT;
    let mut gold = Vec::with_capacity(spans.len());
    for span in spans {
        match *span {
            LocalSpan::Cls => gold.push((0, 0)),
            LocalSpan::Context(s, e) => {
                if s > e || e >= context.len() {
                    return Err(Error::SpanOutOfBounds {
                        start: s,
                        end: e,
                        len: context.len(),
                    });
                }
                gold.push((s + off, e + off));
            }
        }
    }
    gold.sort_unstable();
    gold.dedup();
    Ok(UnifiedInput {
        source_id: String::new(),
        lang: String::new(),
        label: None,
        query,
        context,
        gold,
    })
}

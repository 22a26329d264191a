//! Pre-training example generation from the entity index.
//!
//! The query is the anonymized opening of the definition article, the context
//! is a word window around one anchor, and every span in the window identical
//! to the anchor is an answer.

mod examples;
mod generate;
mod stats;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wikicorpus::Article;

pub use examples::{find_identical_spans, make_context, make_context_at, make_query, sample_unanswerable, MASK};
pub use generate::{entity_rng, example_id, generate_entity, generate_examples, GenOutput, Generator};
pub use stats::{corpus_stats, CorpusStats, StatsRow};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Query length in words.
    pub query_words: usize,
    /// Context length in words, not counting the anchor itself.
    pub context_words: usize,
    pub answerable_cap: usize,
    pub unanswerable_cap: usize,
    pub seed: u64,
    /// Languages to generate for; empty means all.
    pub languages: BTreeSet<String>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            query_words: 50,
            context_words: 200,
            answerable_cap: 10,
            unanswerable_cap: 10,
            seed: 0,
            languages: BTreeSet::new(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.query_words == 0 || self.context_words == 0 {
            return Err(Error::Config("query and context lengths must be at least 1".into()));
        }
        if self.answerable_cap == 0 || self.unanswerable_cap == 0 {
            return Err(Error::Config("example caps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn includes(&self, lang: &str) -> bool {
        self.languages.is_empty() || self.languages.contains(lang)
    }
}

/// One machine-reading record, the line format of `mrc.jsonl`.
///
/// `answers` are inclusive token spans into `context`. A record with
/// `answerable` set and no answers is relevant as a whole: its only gold
/// answer is the sequence-level slot (used by pair classification).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MrcExample {
    pub id: String,
    pub lang: String,
    #[serde(default)]
    pub entity: String,
    pub query: Vec<String>,
    pub context: Vec<String>,
    pub answers: Vec<(usize, usize)>,
    pub answerable: bool,
    /// (definition article id, context article id)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<(u64, u64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl MrcExample {
    /// Checks the record invariants against an optional surface and query cap.
    pub fn validate(&self, surface: Option<&[String]>, max_query: Option<usize>) -> Result<(), String> {
        if self.entity_generated() && self.answerable == self.answers.is_empty() {
            return Err(format!("{}: answerable flag disagrees with answers", self.id));
        }
        let mut prev: Option<usize> = None;
        for &(s, e) in &self.answers {
            if s > e || e >= self.context.len() {
                return Err(format!("{}: span ({s}, {e}) out of bounds", self.id));
            }
            if prev.is_some_and(|p| s <= p) {
                return Err(format!("{}: spans overlap or are unsorted", self.id));
            }
            prev = Some(e);
            if let Some(surface) = surface {
                if &self.context[s..=e] != surface {
                    return Err(format!("{}: span ({s}, {e}) differs from the anchor", self.id));
                }
            }
        }
        if let Some(q) = max_query {
            if self.query.len() > q {
                return Err(format!("{}: query has {} words", self.id, self.query.len()));
            }
        }
        Ok(())
    }

    fn entity_generated(&self) -> bool {
        self.source_id.is_none()
    }
}

/// Articles by id.
#[derive(Debug, Clone, Default)]
pub struct ArticleStore {
    articles: Vec<Article>,
    by_id: HashMap<u64, usize>,
}

impl ArticleStore {
    pub fn new(articles: Vec<Article>) -> Self {
        let by_id = articles
            .iter()
            .enumerate()
            .map(|(i, a)| (a.article_id, i))
            .collect();
        Self { articles, by_id }
    }

    pub fn get(&self, id: u64) -> Option<&Article> {
        self.by_id.get(&id).map(|&i| &self.articles[i])
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }
}

use serde::{Deserialize, Serialize};

use super::dump::RawPage;
use super::index::Redirects;
use super::normalize_title;
use super::tokenize::{char_span_to_tokens, TokenizerRegistry};
use super::wikitext::strip_page;

/// An anchor over article tokens; `start` and `end` are inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorMention {
    pub target: String,
    pub start: usize,
    pub end: usize,
}

impl AnchorMention {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A tokenized content page. Serialized as one line of `articles.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    #[serde(rename = "id")]
    pub article_id: u64,
    #[serde(rename = "lang")]
    pub language: String,
    pub title: String,
    pub tokens: Vec<String>,
    pub anchors: Vec<AnchorMention>,
}

impl Article {
    pub fn surface(&self, anchor: &AnchorMention) -> &[String] {
        &self.tokens[anchor.start..=anchor.end]
    }

    /// Checks the structural invariants: sorted, in-bounds, non-overlapping
    /// anchors and non-empty tokens.
    pub fn validate(&self) -> Result<(), String> {
        if let Some(i) = self.tokens.iter().position(|t| t.is_empty()) {
            return Err(format!("article {}: token {i} is empty", self.article_id));
        }
        let mut prev_end: Option<usize> = None;
        for a in &self.anchors {
            if a.start > a.end || a.end >= self.tokens.len() {
                return Err(format!(
                    "article {}: anchor ({}, {}) out of bounds",
                    self.article_id, a.start, a.end
                ));
            }
            if prev_end.is_some_and(|p| a.start <= p) {
                return Err(format!(
                    "article {}: anchors overlap or are unsorted at {}",
                    self.article_id, a.start
                ));
            }
            prev_end = Some(a.end);
        }
        Ok(())
    }
}

/// Strips and tokenizes a content page. Anchors are mapped from character
/// offsets to every token they touch; an anchor that would overlap an earlier
/// one is dropped.
pub fn build_article(article_id: u64, page: &RawPage, tokenizers: &TokenizerRegistry) -> Article {
    let stripped = strip_page(page);
    let tokens = tokenizers.tokenize(&stripped.text, &page.language);
    let mut anchors: Vec<AnchorMention> = Vec::with_capacity(stripped.anchors.len());
    for a in &stripped.anchors {
        let Some((start, end)) = char_span_to_tokens(&tokens, a.start, a.end) else {
            continue;
        };
        if anchors.last().is_some_and(|prev| start <= prev.end) {
            continue;
        }
        anchors.push(AnchorMention {
            target: a.target.clone(),
            start,
            end,
        });
    }
    Article {
        article_id,
        language: page.language.clone(),
        title: normalize_title(&page.title),
        tokens: tokens.into_iter().map(|t| t.text).collect(),
        anchors,
    }
}

/// Accumulates articles and redirects from a page stream, assigning article
/// ids in document order.
#[derive(Debug, Default)]
pub struct CorpusBuilder {
    pub tokenizers: TokenizerRegistry,
    pub articles: Vec<Article>,
    pub redirects: Redirects,
    next_id: u64,
    pub skipped_pages: usize,
}

impl CorpusBuilder {
    pub fn new(tokenizers: TokenizerRegistry) -> Self {
        Self {
            tokenizers,
            ..Default::default()
        }
    }

    /// Adds a batch of pages. Stripping and tokenization run in parallel when
    /// the `parallel` feature is on; ids follow the batch order either way.
    pub fn add_pages(&mut self, pages: Vec<RawPage>) {
        let mut content = Vec::new();
        for page in pages {
            if page.namespace != 0 {
                self.skipped_pages += 1;
                continue;
            }
            match &page.redirect_target {
                Some(target) => {
                    self.redirects.insert(&page.language, &page.title, target);
                }
                None => {
                    content.push((self.next_id, page));
                    self.next_id += 1;
                }
            }
        }
        let tokenizers = &self.tokenizers;
        #[cfg(feature = "parallel")]
        let built: Vec<Article> = {
            use rayon::prelude::*;
            content
                .par_iter()
                .map(|(id, page)| build_article(*id, page, tokenizers))
                .collect()
        };
        #[cfg(not(feature = "parallel"))]
        let built: Vec<Article> = content
            .iter()
            .map(|(id, page)| build_article(*id, page, tokenizers))
            .collect();
        self.articles.extend(built);
    }
}
